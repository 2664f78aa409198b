#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace sdelab::toml {

// Minimal TOML subset: top-level and one-level [tables], bare keys,
// strings, integers, floats, booleans, and (nested) arrays. Enough for the
// scenario configs; unknown syntax is a parse error.
struct Value {
  enum class Type { String, Integer, Float, Boolean, Array };
  Type type = Type::Integer;
  std::string str;
  long long integer = 0;
  double real = 0;
  bool boolean = false;
  std::vector<Value> array;

  double as_double() const;
  long long as_integer() const;
  const std::string& as_string() const;
  bool as_boolean() const;
  const std::vector<Value>& as_array() const;
  std::vector<double> as_double_array() const;
  std::vector<int> as_int_array() const;
};

struct Table {
  std::map<std::string, Value> entries;

  bool has(const std::string& key) const { return entries.count(key) > 0; }
  const Value& at(const std::string& key) const;
};

struct Document {
  Table root;
  std::vector<std::pair<std::string, Table>> tables;  // declaration order

  const Table* find_table(const std::string& name) const;
};

Document parse(const std::string& text);
Document parse_file(const std::string& path);

std::string format_double(double v);

}  // namespace sdelab::toml
