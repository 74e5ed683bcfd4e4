#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcvox/errors.hpp"

namespace pcvox {

// Line-based key=value configuration. '#' starts a comment; blank lines are
// ignored. Later assignments override earlier ones; CLI flags override by
// calling set().
class Config {
public:
  Config() = default;
  static Config load(const std::string& path);
  static Config parse(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;

  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

private:
  const std::string* lookup(const std::string& key) const;
  std::vector<std::pair<std::string, std::string>> items_;
};

}  // namespace pcvox
