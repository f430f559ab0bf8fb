// src/config.cc

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

#include "bxv/config.h"

#include <algorithm>
#include <cstdlib>

#include "bxv/error.h"
#include "bxv/io.h"

namespace bxv {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  const std::string last = trim(cur);
  if (!last.empty() || !out.empty()) out.push_back(last);
  // Drop empty trailing tokens from "a,b," style lists.
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

}  // namespace

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  return from_string(read_file(path), path.string());
}

ConfigFile ConfigFile::from_string(const std::string& text, const std::string& name) {
  ConfigFile cfg;
  cfg.name_ = name;
  int lineno = 0;
  std::string line;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw_usage(name + ":" + std::to_string(lineno) +
                  ": expected 'key = value', got '" + trimmed + "'");
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    if (key.empty())
      throw_usage(name + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.entries_.count(key))
      throw_usage(name + ":" + std::to_string(lineno) + ": duplicate key '" +
                  key + "' (first at line " +
                  std::to_string(cfg.entries_[key].line) + ")");
    cfg.entries_[key] = Entry{value, lineno};
    if (pos > text.size()) break;
  }
  return cfg;
}

bool ConfigFile::has(const std::string& key) const { return entries_.count(key) > 0; }

const ConfigFile::Entry& ConfigFile::require_entry(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end())
    throw_usage(name_ + ": missing required key '" + key + "'");
  return it->second;
}

void ConfigFile::bad_value(const std::string& key, const std::string& want) const {
  const auto& e = entries_.at(key);
  throw_usage(name_ + ":" + std::to_string(e.line) + ": key '" + key +
              "' has value '" + e.value + "', expected " + want);
}

std::string ConfigFile::get_string(const std::string& key, const std::string& def) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? def : it->second.value;
}

std::string ConfigFile::require_string(const std::string& key) const {
  return require_entry(key).value;
}

long long ConfigFile::get_int(const std::string& key, long long def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  const std::string& v = it->second.value;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end == nullptr || *end != '\0') bad_value(key, "an integer");
  return x;
}

double ConfigFile::get_real(const std::string& key, double def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  const std::string& v = it->second.value;
  if (v == "auto") bad_value(key, "a real number");
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end == nullptr || *end != '\0') bad_value(key, "a real number");
  return x;
}

bool ConfigFile::get_bool(const std::string& key, bool def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  const std::string& v = it->second.value;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, "a boolean (true/false)");
}

std::vector<double> ConfigFile::get_real_list(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return {};
  std::vector<double> out;
  for (const std::string& tok : split_commas(it->second.value)) {
    char* end = nullptr;
    const double x = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end == nullptr || *end != '\0')
      bad_value(key, "a comma-separated list of reals");
    out.push_back(x);
  }
  return out;
}

std::vector<std::string> ConfigFile::get_string_list(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return {};
  std::vector<std::string> out;
  for (const std::string& tok : split_commas(it->second.value))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

void ConfigFile::require_keys_in(const std::set<std::string>& allowed) const {
  for (const auto& [key, entry] : entries_) {
    if (!allowed.count(key))
      throw_usage(name_ + ":" + std::to_string(entry.line) + ": unknown key '" +
                  key + "'");
  }
}

std::set<std::string> ConfigFile::keys() const {
  std::set<std::string> out;
  for (const auto& [key, entry] : entries_) out.insert(key);
  return out;
}

int ConfigFile::line_of(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? 0 : it->second.line;
}

std::vector<int> parse_context(const std::string& text, const std::string& what) {
  std::vector<int> out;
  const std::size_t colon = text.find(':');
  auto to_int = [&](const std::string& tok) {
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (tok.empty() || end == nullptr || *end != '\0')
      throw_usage(what + ": bad context token '" + tok + "' in '" + text + "'");
    return static_cast<int>(v);
  };
  if (colon != std::string::npos) {
    const int lo = to_int(trim(text.substr(0, colon)));
    const int hi = to_int(trim(text.substr(colon + 1)));
    if (hi < lo) throw_usage(what + ": context range '" + text + "' is empty");
    for (int v = lo; v <= hi; ++v) out.push_back(v);
  } else {
    for (const std::string& tok : split_commas(text)) out.push_back(to_int(tok));
  }
  if (out.empty()) throw_usage(what + ": empty context '" + text + "'");
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i] <= out[i - 1])
      throw_usage(what + ": context offsets must be strictly increasing ('" +
                  text + "')");
  return out;
}

}  // namespace bxv
