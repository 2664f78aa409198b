#include "sdelab/toml.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sdelab::toml {

double Value::as_double() const {
  if (type == Type::Float) return real;
  if (type == Type::Integer) return static_cast<double>(integer);
  throw std::runtime_error("toml: expected a number");
}

long long Value::as_integer() const {
  if (type == Type::Integer) return integer;
  throw std::runtime_error("toml: expected an integer");
}

const std::string& Value::as_string() const {
  if (type != Type::String) throw std::runtime_error("toml: expected a string");
  return str;
}

bool Value::as_boolean() const {
  if (type != Type::Boolean) throw std::runtime_error("toml: expected a boolean");
  return boolean;
}

const std::vector<Value>& Value::as_array() const {
  if (type != Type::Array) throw std::runtime_error("toml: expected an array");
  return array;
}

std::vector<double> Value::as_double_array() const {
  std::vector<double> out;
  for (const auto& v : as_array()) out.push_back(v.as_double());
  return out;
}

std::vector<int> Value::as_int_array() const {
  std::vector<int> out;
  for (const auto& v : as_array()) out.push_back(static_cast<int>(v.as_integer()));
  return out;
}

const Value& Table::at(const std::string& key) const {
  auto it = entries.find(key);
  if (it == entries.end()) throw std::runtime_error("toml: missing key '" + key + "'");
  return it->second;
}

const Table* Document::find_table(const std::string& name) const {
  for (const auto& [n, t] : tables) {
    if (n == name) return &t;
  }
  return nullptr;
}

namespace {

struct Cursor {
  const std::string& text;
  size_t pos = 0;
  int line = 1;

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  char take() {
    char c = text[pos++];
    if (c == '\n') ++line;
    return c;
  }
  void skip_ws_inline() {
    while (!done() && (peek() == ' ' || peek() == '\t')) take();
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("toml parse error at line " + std::to_string(line) + ": " + what);
  }
};

void skip_comment_to_eol(Cursor& c) {
  while (!c.done() && c.peek() != '\n') c.take();
}

std::string parse_bare_key(Cursor& c) {
  std::string key;
  while (!c.done() &&
         (std::isalnum(static_cast<unsigned char>(c.peek())) || c.peek() == '_' || c.peek() == '-')) {
    key.push_back(c.take());
  }
  if (key.empty()) c.fail("expected a key");
  return key;
}

Value parse_value(Cursor& c);

Value parse_array(Cursor& c) {
  Value v;
  v.type = Value::Type::Array;
  c.take();  // '['
  while (true) {
    // arrays may span lines
    while (!c.done()) {
      c.skip_ws_inline();
      if (!c.done() && (c.peek() == '\n' || c.peek() == '\r')) {
        c.take();
        continue;
      }
      if (!c.done() && c.peek() == '#') {
        skip_comment_to_eol(c);
        continue;
      }
      break;
    }
    if (c.done()) c.fail("unterminated array");
    if (c.peek() == ']') {
      c.take();
      return v;
    }
    v.array.push_back(parse_value(c));
    while (!c.done()) {
      c.skip_ws_inline();
      if (!c.done() && (c.peek() == '\n' || c.peek() == '\r')) {
        c.take();
        continue;
      }
      if (!c.done() && c.peek() == '#') {
        skip_comment_to_eol(c);
        continue;
      }
      break;
    }
    if (c.done()) c.fail("unterminated array");
    if (c.peek() == ',') {
      c.take();
      continue;
    }
    if (c.peek() == ']') {
      c.take();
      return v;
    }
    c.fail("expected ',' or ']' in array");
  }
}

Value parse_value(Cursor& c) {
  c.skip_ws_inline();
  if (c.done()) c.fail("expected a value");
  const char ch = c.peek();
  if (ch == '"') {
    c.take();
    Value v;
    v.type = Value::Type::String;
    while (!c.done() && c.peek() != '"') {
      char cc = c.take();
      if (cc == '\\' && !c.done()) {
        char esc = c.take();
        switch (esc) {
          case 'n': cc = '\n'; break;
          case 't': cc = '\t'; break;
          case '"': cc = '"'; break;
          case '\\': cc = '\\'; break;
          default: c.fail("unsupported escape");
        }
      }
      v.str.push_back(cc);
    }
    if (c.done()) c.fail("unterminated string");
    c.take();
    return v;
  }
  if (ch == '[') return parse_array(c);
  // bare token: number or boolean
  std::string tok;
  while (!c.done() && c.peek() != ',' && c.peek() != ']' && c.peek() != '\n' && c.peek() != '\r' &&
         c.peek() != '#' && c.peek() != ' ' && c.peek() != '\t') {
    tok.push_back(c.take());
  }
  if (tok == "true" || tok == "false") {
    Value v;
    v.type = Value::Type::Boolean;
    v.boolean = tok == "true";
    return v;
  }
  const bool looks_float = tok.find_first_of(".eE") != std::string::npos ||
                           tok == "inf" || tok == "-inf" || tok == "nan";
  if (!looks_float) {
    long long iv = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), iv);
    if (ec == std::errc() && p == tok.data() + tok.size()) {
      Value v;
      v.type = Value::Type::Integer;
      v.integer = iv;
      return v;
    }
  }
  double dv = 0;
  if (tok == "inf") {
    dv = std::numeric_limits<double>::infinity();
  } else if (tok == "-inf") {
    dv = -std::numeric_limits<double>::infinity();
  } else {
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), dv);
    if (ec != std::errc() || p != tok.data() + tok.size()) c.fail("bad value '" + tok + "'");
  }
  Value v;
  v.type = Value::Type::Float;
  v.real = dv;
  return v;
}

}  // namespace

Document parse(const std::string& text) {
  Document doc;
  Cursor c{text};
  Table* current = &doc.root;
  while (!c.done()) {
    c.skip_ws_inline();
    if (c.done()) break;
    const char ch = c.peek();
    if (ch == '\n' || ch == '\r') {
      c.take();
      continue;
    }
    if (ch == '#') {
      skip_comment_to_eol(c);
      continue;
    }
    if (ch == '[') {
      c.take();
      std::string name = parse_bare_key(c);
      c.skip_ws_inline();
      if (c.done() || c.peek() != ']') c.fail("expected ']' after table name");
      c.take();
      doc.tables.emplace_back(name, Table{});
      current = &doc.tables.back().second;
      continue;
    }
    std::string key = parse_bare_key(c);
    c.skip_ws_inline();
    if (c.done() || c.peek() != '=') c.fail("expected '=' after key '" + key + "'");
    c.take();
    Value v = parse_value(c);
    if (current->entries.count(key)) c.fail("duplicate key '" + key + "'");
    current->entries.emplace(std::move(key), std::move(v));
    c.skip_ws_inline();
    if (!c.done() && c.peek() == '#') skip_comment_to_eol(c);
    if (!c.done() && c.peek() != '\n' && c.peek() != '\r') c.fail("trailing characters after value");
  }
  return doc;
}

Document parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("toml: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  // keep floats recognizably floats on re-parse
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace sdelab::toml
