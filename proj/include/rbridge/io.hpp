#pragma once

#include <map>
#include <string>
#include <vector>

namespace rbridge {

/// Shortest round-trip-safe text for a double (17 significant digits).
std::string format_real(double x);

/// One RFC-4180 line (with trailing CRLF) from already formatted fields.
std::string csv_line(const std::vector<std::string>& fields);
std::string csv_line(const std::vector<double>& values);

/// Writes via a temporary file in the same directory and renames it into
/// place, so readers never see partial content. Throws IoError.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Parses "key = value" lines; '#' starts a comment. Throws UsageError on
/// malformed lines.
std::map<std::string, std::string> parse_key_value(const std::string& text);

/// Comma- or whitespace-separated list of reals.
std::vector<double> parse_real_list(const std::string& text);

}  // namespace rbridge
