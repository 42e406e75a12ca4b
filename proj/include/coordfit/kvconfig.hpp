#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace coordfit {

using KvMap = std::map<std::string, std::string>;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped; surrounding whitespace is trimmed.
KvMap parse_kv(const std::string& text);
KvMap read_kv_file(const std::filesystem::path& path);
void write_kv_file(const std::filesystem::path& path, const KvMap& kv);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);
std::string format_list(const std::vector<double>& values);

std::vector<std::string> split_list(const std::string& text, char sep = ',');
std::vector<double> parse_double_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

/// Typed lookups with defaults; malformed values throw std::invalid_argument
/// naming the key.
class KvReader {
 public:
  explicit KvReader(const KvMap& kv) : kv_(kv) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  std::optional<std::string> get_string_opt(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

 private:
  const KvMap& kv_;
};

}  // namespace coordfit
