#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace aggronet::toml {

// Minimal TOML subset: [table.header] sections, `key = value` pairs with
// dotted keys, strings with basic escapes, integers, floats, booleans, and
// (nested, possibly multi-line) arrays. Comments run from '#' to end of
// line. No array-of-tables, no inline tables, no multi-line strings, no
// datetimes. All parse and type failures throw ConfigError with
// origin:line or field-path context.
struct Value;
using Array = std::vector<Value>;

struct Value {
    std::variant<std::string, int64_t, double, bool, Array> v;

    enum class Kind { string, integer, floating, boolean, array };
    Kind kind() const { return static_cast<Kind>(v.index()); }
    const char* kind_name() const;

    // `key` is the dotted field path, used only for error context.
    const std::string& as_string(const std::string& key) const;
    int64_t as_int(const std::string& key) const;
    double as_float(const std::string& key) const;  // integers promote
    bool as_bool(const std::string& key) const;
    const Array& as_array(const std::string& key) const;
};

struct Table {
    // Values keyed by full dotted path ("train.epochs").
    std::map<std::string, Value> values;
    // Every [header] that appeared, even if it holds no keys.
    std::set<std::string> headers;

    bool has(const std::string& key) const { return values.count(key) != 0; }
    // Declared as a header, or implied by any key under the prefix.
    bool has_table(const std::string& prefix) const;
};

Table parse(const std::string& text, const std::string& origin = "<config>");
Table parse_file(const std::string& path);

}  // namespace aggronet::toml
