#include "rbridge/manifold.hpp"

#include "rbridge/errors.hpp"
#include "rbridge/flat.hpp"
#include "rbridge/so3.hpp"
#include "rbridge/sphere.hpp"
#include "rbridge/surface.hpp"

#include <cmath>
#include <sstream>

namespace rbridge {

double Manifold::inner(const Point&, const Tangent& a, const Tangent& b) const {
    return a.dot(b);
}

double Manifold::norm(const Point& x, const Tangent& a) const {
    return std::sqrt(std::max(0.0, inner(x, a, a)));
}

Tangent Manifold::grad_half_sq_dist(const Point& x, const Point& v) const {
    LogResult lr = log_map(x, v);
    return -lr.vector;
}

double Manifold::half_laplacian_sq_dist(const Point& x, const Point& v) const {
    // (1/2) Delta r^2 = |grad r|^2 + r Delta r, with Delta r = (d-1)/r + d/dr log Theta.
    const double r = distance(x, v);
    return dim() - 2.0 * r * d_r_log_theta_negsqrt(v, x);
}

RadialInfo Manifold::radial_info(const Point& x, const Point& v, bool need_eta,
                                 const Tangent*) const {
    RadialInfo info;
    LogResult lr = log_map(x, v);
    info.log = std::move(lr.vector);
    info.at_cut = lr.at_cut;
    info.r = distance(x, v);
    if (need_eta && !info.at_cut) info.eta = d_r_log_theta_negsqrt(v, x);
    return info;
}

Vec Manifold::frame_coords(const FramePoint& f, const Tangent& w) const {
    Vec c(f.frame.cols());
    for (Eigen::Index i = 0; i < f.frame.cols(); ++i) c(i) = inner(f.base, f.frame.col(i), w);
    return c;
}

void Manifold::orthonormalize(FramePoint& f) const {
    for (Eigen::Index i = 0; i < f.frame.cols(); ++i) {
        Tangent c = project_tangent(f.base, f.frame.col(i));
        for (Eigen::Index j = 0; j < i; ++j) {
            const Tangent prev = f.frame.col(j);
            c -= inner(f.base, prev, c) * prev;
        }
        const double n = norm(f.base, c);
        if (!(n > 1e-12)) throw NumericalError("frame became degenerate during transport");
        f.frame.col(i) = c / n;
    }
}

namespace {

std::vector<double> parse_numbers(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw UsageError("bad number '" + item + "'");
        } catch (const std::logic_error&) {
            throw UsageError("bad number '" + item + "' in manifold id");
        }
    }
    return out;
}

int parse_dim_suffix(const std::string& id, const std::string& prefix) {
    const std::string rest = id.substr(prefix.size());
    if (rest.empty()) return -1;
    for (char c : rest)
        if (c < '0' || c > '9') throw UsageError("unknown manifold id '" + id + "'");
    return std::stoi(rest);
}

}  // namespace

std::shared_ptr<const Manifold> make_manifold(const std::string& id) {
    if (id.rfind("sphere", 0) == 0) {
        const int d = parse_dim_suffix(id, "sphere");
        if (d < 1) throw UsageError("sphere dimension must be >= 1 in '" + id + "'");
        return std::make_shared<Sphere>(d);
    }
    if (id == "cylinder") return std::make_shared<FlatProduct>(FlatProduct::cylinder());
    if (id.rfind("flat-torus", 0) == 0) {
        int d = parse_dim_suffix(id, "flat-torus");
        if (d == -1) d = 2;
        if (d < 1) throw UsageError("flat torus dimension must be >= 1");
        return std::make_shared<FlatProduct>(FlatProduct::flat_torus(d));
    }
    if (id == "so3") return std::make_shared<SO3>();
    if (id.rfind("torus:", 0) == 0) {
        auto p = parse_numbers(id.substr(6));
        if (p.size() != 2) throw UsageError("torus id needs 'torus:R,rho'");
        return std::make_shared<SurfaceManifold>(ParamSurface::torus(p[0], p[1]));
    }
    if (id.rfind("ellipsoid:", 0) == 0) {
        auto p = parse_numbers(id.substr(10));
        if (p.size() != 3) throw UsageError("ellipsoid id needs 'ellipsoid:a,b,c'");
        return std::make_shared<SurfaceManifold>(ParamSurface::ellipsoid(p[0], p[1], p[2]));
    }
    throw UsageError("unknown manifold id '" + id + "'");
}

Point parse_point(const Manifold& m, const Vec& raw) {
    if (auto s = dynamic_cast<const SurfaceManifold*>(&m)) {
        if (raw.size() == 2) return s->surface().embedding(raw);
        if (raw.size() == 3) {
            Point p = s->project_point(raw);
            s->validate_point(p);
            return p;
        }
        throw UsageError("surface points need 2 chart or 3 ambient coordinates");
    }
    if (dynamic_cast<const SO3*>(&m) && raw.size() == 3)
        return SO3::from_matrix(SO3::rodrigues(Eigen::Vector3d(raw)));
    if (raw.size() != m.coord_size())
        throw UsageError("point for " + m.id() + " needs " + std::to_string(m.coord_size()) +
                         " coordinates, got " + std::to_string(raw.size()));
    Point p = m.project_point(raw);
    if (!m.is_flat() && (p - raw).norm() > 1e-6 * (1.0 + raw.norm()))
        throw UsageError("coordinates are not a point of " + m.id());
    m.validate_point(p);
    return p;
}

}  // namespace rbridge
