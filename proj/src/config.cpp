#include "psw/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace psw {

namespace {

std::string trim(const std::string& s) {
  auto first = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  auto last = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
  return first < last ? std::string(first, last) : std::string();
}

bool valid_key(const std::string& key) {
  return !key.empty() && std::all_of(key.begin(), key.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.';
  });
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig cfg;
  cfg.source_ = source;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected `name = value`");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key))
      throw ConfigError(source + ":" + std::to_string(line_no) + ": invalid key '" + key + "'");
    if (cfg.entries_.count(key))
      throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    cfg.order_.push_back(key);
    cfg.entries_[key] = Entry{value, line_no, false};
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in, "<string>");
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ConfigError("invalid key '" + key + "'");
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    order_.push_back(key);
    entries_[key] = Entry{value, 0, false};
  } else {
    it->second.value = value;
  }
}

bool KeyValueConfig::contains(const std::string& key) const { return entries_.count(key) > 0; }

const KeyValueConfig::Entry* KeyValueConfig::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

KeyValueConfig::Entry* KeyValueConfig::find(const std::string& key) {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::optional<std::string> KeyValueConfig::take_string(const std::string& key) {
  Entry* e = find(key);
  if (!e) return std::nullopt;
  e->taken = true;
  return e->value;
}

std::string KeyValueConfig::take_string(const std::string& key, const std::string& fallback) {
  return take_string(key).value_or(fallback);
}

std::optional<double> KeyValueConfig::take_double(const std::string& key) {
  Entry* e = find(key);
  if (!e) return std::nullopt;
  e->taken = true;
  const std::string& v = e->value;
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(source_ + ":" + std::to_string(e->line) + ": '" + key + "' is not a number: " + v);
  return out;
}

double KeyValueConfig::take_double(const std::string& key, double fallback) {
  return take_double(key).value_or(fallback);
}

std::optional<std::int64_t> KeyValueConfig::take_int(const std::string& key) {
  Entry* e = find(key);
  if (!e) return std::nullopt;
  e->taken = true;
  const std::string& v = e->value;
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(source_ + ":" + std::to_string(e->line) + ": '" + key + "' is not an integer: " + v);
  return out;
}

std::int64_t KeyValueConfig::take_int(const std::string& key, std::int64_t fallback) {
  return take_int(key).value_or(fallback);
}

bool KeyValueConfig::take_bool(const std::string& key, bool fallback) {
  auto v = take_string(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError(source_ + ": '" + key + "' is not a boolean: " + *v);
}

void KeyValueConfig::require_all_consumed() const {
  std::string unknown;
  for (const auto& key : order_) {
    const Entry& e = entries_.at(key);
    if (e.taken) continue;
    if (!unknown.empty()) unknown += ", ";
    unknown += key;
    if (e.line > 0) unknown += " (line " + std::to_string(e.line) + ")";
  }
  if (!unknown.empty()) throw ConfigError(source_ + ": unknown key(s): " + unknown);
}

std::vector<std::pair<std::string, std::string>> KeyValueConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(order_.size());
  for (const auto& key : order_) out.emplace_back(key, entries_.at(key).value);
  return out;
}

std::string format_double(double value) {
  std::ostringstream os;
  os.precision(17);
  os << value;
  return os.str();
}

void Manifest::add(const std::string& key, const std::string& value) { items_.emplace_back(key, value); }
void Manifest::add(const std::string& key, double value) { add(key, format_double(value)); }
void Manifest::add(const std::string& key, std::int64_t value) { add(key, std::to_string(value)); }

void Manifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << "# resolved run configuration\n";
  for (const auto& [k, v] : items_) out << k << " = " << v << "\n";
  if (!out) throw std::runtime_error("failed writing manifest " + path.string());
}

}  // namespace psw
