#ifndef SECS_IO_HPP
#define SECS_IO_HPP

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace secs {

/// Shortest decimal representation that round-trips to the same double.
std::string format_number(double value);

/// Strict full-string parse; throws SchemaError naming `what` on failure.
double parse_number(std::string_view text, std::string_view what);

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

/// Writes through a sibling temp file and renames it into place, so the
/// destination is either the complete new content or untouched.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer);

std::string read_text_file(const std::filesystem::path& path);

} // namespace secs

#endif // SECS_IO_HPP
