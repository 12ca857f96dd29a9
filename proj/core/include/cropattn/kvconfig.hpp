#ifndef CROPATTN_KVCONFIG_HPP
#define CROPATTN_KVCONFIG_HPP

#include <map>
#include <string>
#include <vector>

namespace cropattn {

/// Plain-text key=value configuration. Lines are `key = value`; blank lines
/// and lines starting with '#' are ignored. Keys keep their order of first
/// appearance so dependent code can iterate deterministically.
class KeyValueConfig {
public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_text(const std::string& text);

  bool has(const std::string& key) const;

  std::string get(const std::string& key) const; // throws InvalidConfig if absent
  std::string get_or(const std::string& key, const std::string& fallback) const;

  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int_or(const std::string& key, long long fallback) const;

  /// Comma-separated list value, items trimmed.
  std::vector<std::string> get_list(const std::string& key) const;

  /// Keys in first-appearance order.
  const std::vector<std::string>& keys() const { return order_; }

  /// Keys with the given prefix, in first-appearance order.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

std::string trim(const std::string& s);

} // namespace cropattn

#endif // CROPATTN_KVCONFIG_HPP
