#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace aclstm {

// key=value run configuration, one entry per line, '#' starts a comment.
// Every key has a default; unknown keys are rejected with ConfigError.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_file(const std::filesystem::path& path);
  void parse(std::string_view text, std::string_view origin);
  void set(const std::string& key, const std::string& value);

  bool known(const std::string& key) const;
  // True when the key was set explicitly rather than left at its default.
  bool overridden(const std::string& key) const { return set_.count(key) != 0; }
  const std::string& raw(const std::string& key) const;
  std::string str(const std::string& key) const { return raw(key); }
  double real(const std::string& key) const;
  long long integer(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<int> integers(const std::string& key) const;
  std::vector<std::string> strings(const std::string& key) const;

  // Fully resolved configuration, keys sorted.
  std::string dump() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> set_;
};

}  // namespace aclstm
