#include "toml_lite.hpp"

#include <charconv>
#include <cstdint>
#include <vector>

#include "prbcast/errors.hpp"

namespace prbcast::detail {

namespace {

using nlohmann::json;

[[noreturn]] void fail(std::size_t lineno, const std::string& msg) {
  throw ParseError("toml:" + std::to_string(lineno) + ": " + msg);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Removes a trailing comment, respecting double-quoted strings.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::vector<std::string> split_path(const std::string& s, std::size_t lineno) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto dot = s.find('.', pos);
    const std::string part = trim(s.substr(pos, dot == std::string::npos ? dot : dot - pos));
    if (part.empty()) fail(lineno, "empty table-name segment in '" + s + "'");
    parts.push_back(part);
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return parts;
}

json parse_scalar(const std::string& raw, std::size_t lineno) {
  const std::string v = trim(raw);
  if (v.empty()) fail(lineno, "missing value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') fail(lineno, "unterminated string " + v);
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        ++i;
        switch (v[i]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(lineno, std::string("unsupported escape \\") + v[i]);
        }
      } else {
        out += v[i];
      }
    }
    return json(out);
  }
  if (v == "true") return json(true);
  if (v == "false") return json(false);

  const bool looks_float = v.find_first_of(".eE") != std::string::npos &&
                           v.find_first_not_of("+-0123456789.eE_") == std::string::npos;
  if (!looks_float) {
    std::int64_t iv = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), iv);
    if (ec == std::errc() && p == v.data() + v.size()) return json(iv);
    std::uint64_t uv = 0;
    auto [p2, ec2] = std::from_chars(v.data(), v.data() + v.size(), uv);
    if (ec2 == std::errc() && p2 == v.data() + v.size()) return json(uv);
  }
  double dv = 0.0;
  auto [p3, ec3] = std::from_chars(v.data(), v.data() + v.size(), dv);
  if (ec3 == std::errc() && p3 == v.data() + v.size()) return json(dv);
  fail(lineno, "cannot parse value '" + v + "'");
}

json parse_value(const std::string& raw, std::size_t lineno) {
  const std::string v = trim(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') fail(lineno, "unterminated array " + v);
    json arr = json::array();
    std::string inner = v.substr(1, v.size() - 2);
    std::size_t pos = 0;
    bool in_string = false;
    std::size_t item_start = 0;
    for (pos = 0; pos <= inner.size(); ++pos) {
      if (pos < inner.size() && inner[pos] == '"') in_string = !in_string;
      if (pos == inner.size() || (inner[pos] == ',' && !in_string)) {
        const std::string item = trim(inner.substr(item_start, pos - item_start));
        if (!item.empty()) arr.push_back(parse_scalar(item, lineno));
        item_start = pos + 1;
      }
    }
    return arr;
  }
  return parse_scalar(v, lineno);
}

json* descend(json& root, const std::vector<std::string>& path, std::size_t lineno) {
  json* cursor = &root;
  for (const std::string& part : path) {
    if (cursor->is_array()) cursor = &cursor->back();
    if (!cursor->is_object()) fail(lineno, "cannot descend into non-table '" + part + "'");
    if (!cursor->contains(part)) (*cursor)[part] = json::object();
    cursor = &(*cursor)[part];
  }
  return cursor;
}

}  // namespace

json parse_toml_lite(const std::string& text) {
  json root = json::object();
  json* current = &root;

  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string line = text.substr(pos, eol == std::string::npos ? eol : eol - pos);
    pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
    ++lineno;

    line = trim(strip_comment(line));
    if (line.empty()) continue;

    if (line.front() == '[') {
      const bool is_array = line.rfind("[[", 0) == 0;
      const std::string closer = is_array ? "]]" : "]";
      if (line.substr(line.size() - closer.size()) != closer) {
        fail(lineno, "unterminated table header " + line);
      }
      const std::string name =
          line.substr(is_array ? 2 : 1, line.size() - 2 * (is_array ? 2 : 1));
      const auto path = split_path(name, lineno);
      json* parent = &root;
      if (path.size() > 1) {
        parent = descend(root, {path.begin(), path.end() - 1}, lineno);
      }
      if (parent->is_array()) parent = &parent->back();
      const std::string& leaf = path.back();
      if (is_array) {
        if (!parent->contains(leaf)) (*parent)[leaf] = json::array();
        if (!(*parent)[leaf].is_array()) fail(lineno, "'" + leaf + "' is not an array of tables");
        (*parent)[leaf].push_back(json::object());
        current = &(*parent)[leaf].back();
      } else {
        if (!parent->contains(leaf)) (*parent)[leaf] = json::object();
        current = &(*parent)[leaf];
        if (!current->is_object()) fail(lineno, "'" + leaf + "' is not a table");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(lineno, "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(lineno, "empty key");
    (*current)[key] = parse_value(line.substr(eq + 1), lineno);
  }
  return root;
}

}  // namespace prbcast::detail
