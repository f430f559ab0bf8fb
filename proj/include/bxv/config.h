// include/bxv/config.h

// Copyright 2026  The bxv authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace bxv {

/// Line-oriented "key = value" config file.  '#' starts a comment, blank
/// lines are ignored.  Parse errors carry file:line context.
class ConfigFile {
 public:
  static ConfigFile load(const std::filesystem::path& path);
  static ConfigFile from_string(const std::string& text, const std::string& name);

  bool has(const std::string& key) const;
  const std::string& name() const { return name_; }

  std::string get_string(const std::string& key, const std::string& def) const;
  std::string require_string(const std::string& key) const;
  long long get_int(const std::string& key, long long def) const;
  double get_real(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<double> get_real_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  /// Throws a usage error naming the first key not in `allowed` and its line.
  void require_keys_in(const std::set<std::string>& allowed) const;

  std::set<std::string> keys() const;
  int line_of(const std::string& key) const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::string name_;
  std::map<std::string, Entry> entries_;

  const Entry& require_entry(const std::string& key) const;
  [[noreturn]] void bad_value(const std::string& key, const std::string& want) const;
};

/// Parses a layer-context spec: either "a:b" (all offsets a..b) or a comma
/// list "a,b,c".  Offsets must be strictly increasing.
std::vector<int> parse_context(const std::string& text, const std::string& what);

}  // namespace bxv
