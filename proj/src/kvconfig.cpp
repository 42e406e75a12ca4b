#include "coordfit/kvconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coordfit {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw std::invalid_argument("bad value for '" + key + "': " + text);
  return v;
}

}  // namespace

KvMap parse_kv(const std::string& text) {
  KvMap kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("line " + std::to_string(lineno) + " is not key=value");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

KvMap read_kv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kv(ss.str());
}

void write_kv_file(const std::filesystem::path& path, const KvMap& kv) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format double");
  return std::string(buf, ptr);
}

std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) out.push_back(parse_number<double>("list", s));
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& s : split_list(text)) out.push_back(parse_number<int>("list", s));
  return out;
}

std::optional<std::string> KvReader::get_string_opt(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return std::nullopt;
  return it->second;
}

std::string KvReader::get_string(const std::string& key, const std::string& fallback) const {
  return get_string_opt(key).value_or(fallback);
}

int KvReader::get_int(const std::string& key, int fallback) const {
  const auto v = get_string_opt(key);
  return v ? parse_number<int>(key, *v) : fallback;
}

double KvReader::get_double(const std::string& key, double fallback) const {
  const auto v = get_string_opt(key);
  return v ? parse_number<double>(key, *v) : fallback;
}

std::uint64_t KvReader::get_uint64(const std::string& key, std::uint64_t fallback) const {
  const auto v = get_string_opt(key);
  return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

bool KvReader::get_bool(const std::string& key, bool fallback) const {
  const auto v = get_string_opt(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw std::invalid_argument("bad boolean for '" + key + "': " + *v);
}

}  // namespace coordfit
