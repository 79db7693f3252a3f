#pragma once

// Plain-text plant definitions:
//
//   # comment
//   [plant]
//   name = twod
//   dim = 2
//
//   [params]
//   a1 = -1
//   a2 = -2
//
//   [dynamics]
//   x1' = a1*x1 + x2^2
//   x2' = a2*x2 + u
//
//   [observable]
//   y = x1
//
// [observable] is optional and defaults to y = x1.

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "koopfr/errors.hpp"
#include "koopfr/expr.hpp"
#include "koopfr/system.hpp"

namespace koopfr {

/// Error in a plant file, located by 1-based line and column.
class PlantFileError : public ConfigError {
   public:
    PlantFileError(std::string source, std::size_t line, std::size_t column, const std::string& message)
        : ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line),
          column_(column) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

   private:
    std::size_t line_;
    std::size_t column_;
};

namespace detail {

inline std::size_t skip_space(std::string_view s, std::size_t i) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    return i;
}

inline std::string_view trim_right(std::string_view s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

struct PlantLine {
    std::size_t number;
    std::size_t key_col;    // 1-based column of the key
    std::size_t value_col;  // 1-based column of the value
    std::string key;
    std::string value;
};

}  // namespace detail

inline PlantSpec parse_plant(std::string_view text, const std::string& source = "<plant>") {
    auto fail = [&](std::size_t line, std::size_t col, const std::string& msg) -> PlantFileError {
        return PlantFileError(source, line, col, msg);
    };

    std::map<std::string, std::vector<detail::PlantLine>> sections;
    std::map<std::string, std::size_t> section_line;
    std::string current;
    std::size_t number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++number;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim_right(line);
        const std::size_t start = detail::skip_space(line, 0);
        if (start == line.size()) continue;

        if (line[start] == '[') {
            if (line.back() != ']') throw fail(number, line.size() + 1, "expected ']'");
            current = std::string(line.substr(start + 1, line.size() - start - 2));
            if (current != "plant" && current != "params" && current != "dynamics" && current != "observable")
                throw fail(number, start + 2, "unknown section [" + current + "]");
            if (section_line.count(current)) throw fail(number, start + 1, "duplicate section [" + current + "]");
            section_line[current] = number;
            sections[current];
            continue;
        }
        if (current.empty()) throw fail(number, start + 1, "entry outside of any section");
        const auto eq = line.find('=', start);
        if (eq == std::string_view::npos) throw fail(number, line.size() + 1, "expected '='");
        const std::string key(detail::trim_right(line.substr(start, eq - start)));
        if (key.empty()) throw fail(number, start + 1, "missing key before '='");
        const std::size_t vstart = detail::skip_space(line, eq + 1);
        if (vstart == line.size()) throw fail(number, vstart + 1, "missing value after '='");
        sections[current].push_back({number, start + 1, vstart + 1, key, std::string(line.substr(vstart))});
    }

    PlantSpec p;
    bool have_dim = false;
    for (const auto& e : sections["plant"]) {
        if (e.key == "name") {
            p.name = e.value;
        } else if (e.key == "dim") {
            int d = 0;
            auto [end, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), d);
            if (ec != std::errc() || end != e.value.data() + e.value.size() || d < 1)
                throw fail(e.number, e.value_col, "dim must be a positive integer");
            p.dim = d;
            have_dim = true;
        } else {
            throw fail(e.number, e.key_col, "unknown key '" + e.key + "' in [plant]");
        }
    }
    if (!have_dim) throw fail(section_line.count("plant") ? section_line["plant"] : 1, 1, "[plant] must set dim");

    for (const auto& e : sections["params"]) {
        if (detail::is_reserved(e.key)) throw fail(e.number, e.key_col, "parameter name '" + e.key + "' is reserved");
        if (p.params.count(e.key)) throw fail(e.number, e.key_col, "duplicate parameter '" + e.key + "'");
        double v = 0.0;
        auto [end, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
        if (ec != std::errc() || end != e.value.data() + e.value.size() || !std::isfinite(v))
            throw fail(e.number, e.value_col, "parameter value must be a finite real number");
        p.params[e.key] = v;
    }
    const auto names = p.param_names();

    auto parse_at = [&](const detail::PlantLine& e) {
        try {
            return parse(e.value, p.dim, names);
        } catch (const SyntaxError& err) {
            throw fail(e.number, e.value_col + err.offset(), err.message());
        } catch (const UnknownIdentifier& err) {
            const auto at = e.value.find(err.name());
            throw fail(e.number, e.value_col + (at == std::string::npos ? 0 : at),
                       "unknown identifier '" + err.name() + "'");
        } catch (const Error& err) {
            throw fail(e.number, e.value_col, err.what());
        }
    };

    p.dynamics.assign(static_cast<std::size_t>(p.dim), Expr{});
    for (const auto& e : sections["dynamics"]) {
        int k = 0;
        const bool shaped = e.key.size() >= 3 && e.key[0] == 'x' && e.key.back() == '\'';
        const char* first = e.key.data() + 1;
        const char* last = e.key.data() + e.key.size() - 1;
        auto [end, ec] = shaped ? std::from_chars(first, last, k) : std::from_chars_result{first, std::errc::invalid_argument};
        if (ec != std::errc() || end != last) throw fail(e.number, e.key_col, "expected x<k>' on the left-hand side");
        if (k < 1 || k > p.dim) throw fail(e.number, e.key_col, "state index out of range 1.." + std::to_string(p.dim));
        auto& slot = p.dynamics[static_cast<std::size_t>(k - 1)];
        if (!slot.empty()) throw fail(e.number, e.key_col, "x" + std::to_string(k) + "' defined twice");
        slot = parse_at(e);
    }
    for (int k = 1; k <= p.dim; ++k)
        if (p.dynamics[static_cast<std::size_t>(k - 1)].empty())
            throw fail(section_line.count("dynamics") ? section_line["dynamics"] : 1, 1,
                       "missing equation for x" + std::to_string(k) + "'");

    const auto& obs = sections["observable"];
    if (obs.size() > 1) throw fail(obs[1].number, obs[1].key_col, "only one observable may be given");
    if (obs.empty()) {
        p.observable = Expr::state(1);
    } else {
        if (obs[0].key != "y") throw fail(obs[0].number, obs[0].key_col, "observable must be written y = <expr>");
        p.observable = parse_at(obs[0]);
    }
    p.validate();
    return p;
}

inline PlantSpec load_plant(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open plant file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_plant(ss.str(), path);
}

}  // namespace koopfr
