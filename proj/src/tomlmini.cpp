#include "aggronet/tomlmini.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "aggronet/error.hpp"

namespace aggronet::toml {

const char* Value::kind_name() const {
    switch (kind()) {
        case Kind::string: return "string";
        case Kind::integer: return "integer";
        case Kind::floating: return "float";
        case Kind::boolean: return "boolean";
        case Kind::array: return "array";
    }
    return "?";
}

namespace {

[[noreturn]] void type_fail(const std::string& key, const char* want, const Value& v) {
    throw ConfigError(key + ": expected " + want + ", got " + v.kind_name());
}

}  // namespace

const std::string& Value::as_string(const std::string& key) const {
    if (kind() != Kind::string) type_fail(key, "string", *this);
    return std::get<std::string>(v);
}

int64_t Value::as_int(const std::string& key) const {
    if (kind() != Kind::integer) type_fail(key, "integer", *this);
    return std::get<int64_t>(v);
}

double Value::as_float(const std::string& key) const {
    if (kind() == Kind::integer) return static_cast<double>(std::get<int64_t>(v));
    if (kind() != Kind::floating) type_fail(key, "number", *this);
    return std::get<double>(v);
}

bool Value::as_bool(const std::string& key) const {
    if (kind() != Kind::boolean) type_fail(key, "boolean", *this);
    return std::get<bool>(v);
}

const Array& Value::as_array(const std::string& key) const {
    if (kind() != Kind::array) type_fail(key, "array", *this);
    return std::get<Array>(v);
}

bool Table::has_table(const std::string& prefix) const {
    if (headers.count(prefix)) return true;
    std::string dotted = prefix + ".";
    auto it = values.lower_bound(dotted);
    return it != values.end() && it->first.compare(0, dotted.size(), dotted) == 0;
}

namespace {

bool is_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

struct Scanner {
    const std::string& s;
    std::string origin;
    size_t i = 0;
    int line = 1;

    bool eof() const { return i >= s.size(); }
    char peek() const { return s[i]; }
    char get() {
        char c = s[i++];
        if (c == '\n') ++line;
        return c;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
    }

    void skip_inline_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++i;
    }
    void skip_to_eol() {
        while (!eof() && peek() != '\n') ++i;
    }
    // Whitespace, comments, and newlines.
    void skip_void() {
        for (;;) {
            skip_inline_ws();
            if (!eof() && peek() == '#') {
                skip_to_eol();
                continue;
            }
            if (!eof() && peek() == '\n') {
                get();
                continue;
            }
            break;
        }
    }
    void expect_eol(const char* after) {
        skip_inline_ws();
        if (!eof() && peek() == '#') skip_to_eol();
        if (!eof() && peek() != '\n') fail(std::string("unexpected text after ") + after);
    }

    std::string key_segment() {
        skip_inline_ws();
        std::string k;
        while (!eof() && is_key_char(peek())) k += get();
        if (k.empty()) fail("expected a key");
        return k;
    }

    std::string dotted_key() {
        std::string k = key_segment();
        skip_inline_ws();
        while (!eof() && peek() == '.') {
            get();
            k += "." + key_segment();
            skip_inline_ws();
        }
        return k;
    }

    std::string string_literal() {
        get();  // opening quote
        std::string out;
        for (;;) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = get();
            if (c == '"') return out;
            if (c == '\\') {
                if (eof()) fail("unterminated string escape");
                char e = get();
                switch (e) {
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    default: fail(std::string("unsupported string escape '\\") + e + "'");
                }
            } else {
                out += c;
            }
        }
    }

    Value number_or_bool() {
        std::string tok;
        while (!eof() && peek() != ' ' && peek() != '\t' && peek() != '\r' && peek() != '\n' &&
               peek() != ',' && peek() != ']' && peek() != '#')
            tok += get();
        if (tok == "true") return Value{true};
        if (tok == "false") return Value{false};

        std::string digits;
        for (size_t p = 0; p < tok.size(); ++p) {
            if (tok[p] == '_') {
                bool mid = p > 0 && p + 1 < tok.size() &&
                           std::isdigit(static_cast<unsigned char>(tok[p - 1])) &&
                           std::isdigit(static_cast<unsigned char>(tok[p + 1]));
                if (!mid) fail("misplaced underscore in number '" + tok + "'");
                continue;
            }
            digits += tok[p];
        }
        if (digits.empty()) fail("expected a value");

        bool looks_float = digits.find_first_of(".eE") != std::string::npos;
        try {
            size_t used = 0;
            if (looks_float) {
                double d = std::stod(digits, &used);
                if (used != digits.size()) fail("malformed number '" + tok + "'");
                return Value{d};
            }
            int64_t n = std::stoll(digits, &used);
            if (used != digits.size()) fail("malformed number '" + tok + "'");
            return Value{n};
        } catch (const std::invalid_argument&) {
            fail("malformed value '" + tok + "'");
        } catch (const std::out_of_range&) {
            fail("number out of range '" + tok + "'");
        }
    }

    Value value() {
        skip_inline_ws();
        if (eof() || peek() == '\n') fail("expected a value");
        if (peek() == '"') return Value{string_literal()};
        if (peek() == '[') {
            get();
            Array items;
            for (;;) {
                skip_void();
                if (eof()) fail("unterminated array");
                if (peek() == ']') {
                    get();
                    return Value{std::move(items)};
                }
                items.push_back(value());
                skip_void();
                if (eof()) fail("unterminated array");
                if (peek() == ',') {
                    get();
                    continue;
                }
                if (peek() == ']') {
                    get();
                    return Value{std::move(items)};
                }
                fail("expected ',' or ']' in array");
            }
        }
        return number_or_bool();
    }
};

}  // namespace

Table parse(const std::string& text, const std::string& origin) {
    Scanner sc{text, origin};
    Table t;
    std::string prefix;
    for (;;) {
        sc.skip_void();
        if (sc.eof()) break;
        if (sc.peek() == '[') {
            sc.get();
            if (!sc.eof() && sc.peek() == '[') sc.fail("array-of-tables is not supported");
            std::string header = sc.dotted_key();
            sc.skip_inline_ws();
            if (sc.eof() || sc.peek() != ']') sc.fail("expected ']' after table name");
            sc.get();
            sc.expect_eol("table header");
            if (t.headers.count(header)) sc.fail("duplicate table [" + header + "]");
            if (t.values.count(header)) sc.fail("table [" + header + "] conflicts with a key");
            t.headers.insert(header);
            prefix = header;
            continue;
        }
        std::string key = sc.dotted_key();
        std::string full = prefix.empty() ? key : prefix + "." + key;
        sc.skip_inline_ws();
        if (sc.eof() || sc.peek() != '=') sc.fail("expected '=' after key '" + full + "'");
        sc.get();
        Value v = sc.value();
        sc.expect_eol("value");
        if (t.values.count(full)) sc.fail("duplicate key '" + full + "'");
        if (t.headers.count(full)) sc.fail("key '" + full + "' conflicts with a table");
        t.values.emplace(std::move(full), std::move(v));
    }
    return t;
}

Table parse_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read config file " + path);
    std::ostringstream body;
    body << f.rdbuf();
    return parse(body.str(), path);
}

}  // namespace aggronet::toml
