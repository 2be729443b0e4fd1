#pragma once

#include "diatomic/discrete_dist.hpp"
#include "diatomic/errors.hpp"
#include "diatomic/mdp.hpp"

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace diatomic {

using Json = nlohmann::json;

/// Malformed input file. Line and column are 1-based; 0 when unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, std::size_t column, const std::string& message)
        : std::runtime_error(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

/// Parses JSON text; syntax errors become ParseError at the offending line and column.
inline Json parse_json(const std::string& text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        // byte is the 1-based position of the offending character.
        const auto [line, column] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
        std::string message = e.what();
        if (const auto pos = message.find("syntax error"); pos != std::string::npos) message = message.substr(pos);
        throw ParseError(source, line, column, message);
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, 0, "cannot open file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

/// Schema violation at a JSON location; reported against the file with the given path.
[[noreturn]] inline void schema_error(const std::string& source, const std::string& where, const std::string& what) {
    throw ParseError(source, 0, 0, where + ": " + what);
}

inline double number_at(const Json& node, const char* key, const std::string& source, const std::string& where) {
    if (!node.contains(key) || !node[key].is_number()) schema_error(source, where, std::string("missing number '") + key + "'");
    const double v = node[key].get<double>();
    if (!std::isfinite(v)) schema_error(source, where, std::string("'") + key + "' must be finite");
    return v;
}

/// An index field given as an integer or as a name from `names`.
inline std::size_t index_at(const Json& node, const char* key, const std::vector<std::string>& names,
                            const std::string& source, const std::string& where) {
    if (!node.contains(key)) schema_error(source, where, std::string("missing field '") + key + "'");
    const Json& v = node[key];
    if (v.is_number_integer()) {
        const auto i = v.get<long long>();
        if (i < 0 || static_cast<std::size_t>(i) >= names.size()) {
            schema_error(source, where, std::string("'") + key + "' out of range");
        }
        return static_cast<std::size_t>(i);
    }
    if (v.is_string()) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == v.get<std::string>()) return i;
        }
        schema_error(source, where, "unknown name '" + v.get<std::string>() + "'");
    }
    schema_error(source, where, std::string("'") + key + "' must be an index or a name");
}

inline std::vector<std::string> name_list(const Json& root, const char* key, const std::string& source) {
    if (!root.contains(key) || !root[key].is_array() || root[key].empty()) {
        schema_error(source, std::string("/") + key, "must be a non-empty array of names");
    }
    std::vector<std::string> out;
    for (const Json& name : root[key]) {
        if (!name.is_string()) schema_error(source, std::string("/") + key, "names must be strings");
        out.push_back(name.get<std::string>());
    }
    return out;
}

} // namespace detail

/**
 * Builds an MDP from the JSON schema {gamma, states, actions, transitions,
 * rewards}. Missing entries are 0. A state/action pair without any transition
 * entry is taken as "action not offered in that state".
 */
inline Mdp mdp_from_json(const Json& root, const std::string& source = "<json>") {
    if (!root.is_object()) detail::schema_error(source, "/", "top level must be an object");
    if (!root.contains("gamma") || !root["gamma"].is_number()) detail::schema_error(source, "/gamma", "missing number");
    const auto states = detail::name_list(root, "states", source);
    const auto actions = detail::name_list(root, "actions", source);
    const std::size_t n_x = states.size();
    const std::size_t n_a = actions.size();
    std::vector<double> p(n_x * n_a * n_x, 0.0);
    std::vector<double> r(n_x * n_a * n_x, 0.0);
    std::vector<bool> listed(n_x * n_a, false);

    auto entries = [&](const char* key) -> const Json& {
        if (!root.contains(key) || !root[key].is_array()) detail::schema_error(source, std::string("/") + key, "must be an array");
        return root[key];
    };
    const Json& transitions = entries("transitions");
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        const std::string where = "/transitions/" + std::to_string(i);
        const Json& e = transitions[i];
        if (!e.is_object()) detail::schema_error(source, where, "entry must be an object");
        const auto x = detail::index_at(e, "x", states, source, where);
        const auto a = detail::index_at(e, "a", actions, source, where);
        const auto y = detail::index_at(e, "next", states, source, where);
        p[(x * n_a + a) * n_x + y] += detail::number_at(e, "p", source, where);
        listed[x * n_a + a] = true;
    }
    if (root.contains("rewards")) {
        const Json& rewards = entries("rewards");
        for (std::size_t i = 0; i < rewards.size(); ++i) {
            const std::string where = "/rewards/" + std::to_string(i);
            const Json& e = rewards[i];
            if (!e.is_object()) detail::schema_error(source, where, "entry must be an object");
            const auto x = detail::index_at(e, "x", states, source, where);
            const auto a = detail::index_at(e, "a", actions, source, where);
            const auto y = detail::index_at(e, "next", states, source, where);
            r[(x * n_a + a) * n_x + y] = detail::number_at(e, "r", source, where);
        }
    }
    std::vector<std::vector<ActionId>> offered(n_x);
    for (StateId x = 0; x < n_x; ++x) {
        for (ActionId a = 0; a < n_a; ++a) {
            if (listed[x * n_a + a]) {
                offered[x].push_back(a);
            } else {
                p[(x * n_a + a) * n_x + x] = 1.0; // placeholder row, never offered
            }
        }
        if (offered[x].empty()) detail::schema_error(source, "/transitions", "state '" + states[x] + "' has no action");
    }
    try {
        Mdp mdp(n_x, n_a, std::move(p), std::move(r), root["gamma"].get<double>(), states, actions);
        return mdp.restricted_to(std::move(offered));
    } catch (const std::exception& e) {
        throw ParseError(source, 0, 0, e.what());
    }
}

inline Mdp parse_mdp(const std::string& text, const std::string& source = "<string>") {
    return mdp_from_json(detail::parse_json(text, source), source);
}

inline Mdp load_mdp(const std::string& path) { return parse_mdp(detail::read_file(path), path); }

inline Json mdp_to_json(const Mdp& mdp) {
    Json root;
    root["gamma"] = mdp.gamma();
    root["states"] = mdp.state_names();
    root["actions"] = mdp.action_names();
    root["transitions"] = Json::array();
    root["rewards"] = Json::array();
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        for (ActionId a : mdp.actions(x)) {
            for (StateId y = 0; y < mdp.n_states(); ++y) {
                if (mdp.p(x, a, y) != 0.0) root["transitions"].push_back({{"x", x}, {"a", a}, {"next", y}, {"p", mdp.p(x, a, y)}});
                if (mdp.r(x, a, y) != 0.0) root["rewards"].push_back({{"x", x}, {"a", a}, {"next", y}, {"r", mdp.r(x, a, y)}});
            }
        }
    }
    return root;
}

inline void save_json(const std::string& path, const Json& value) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << value.dump(2) << "\n";
}

/// Distribution file: JSON list of {"value": v, "prob": p}.
inline DiscreteDist dist_from_json(const Json& root, const std::string& source = "<json>") {
    if (!root.is_array() || root.empty()) detail::schema_error(source, "/", "must be a non-empty array of atoms");
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < root.size(); ++i) {
        const std::string where = "/" + std::to_string(i);
        atoms.push_back({detail::number_at(root[i], "value", source, where), detail::number_at(root[i], "prob", source, where)});
    }
    try {
        return DiscreteDist(std::move(atoms));
    } catch (const std::exception& e) {
        throw ParseError(source, 0, 0, e.what());
    }
}

inline DiscreteDist parse_dist(const std::string& text, const std::string& source = "<string>") {
    return dist_from_json(detail::parse_json(text, source), source);
}

inline DiscreteDist load_dist(const std::string& path) { return parse_dist(detail::read_file(path), path); }

inline Json dist_to_json(const DiscreteDist& d) {
    Json out = Json::array();
    for (const Atom& atom : d.atoms()) out.push_back({{"value", atom.value}, {"prob", atom.prob}});
    return out;
}

namespace detail {

inline ActionId action_by_token(const Mdp& mdp, const std::string& token) {
    for (ActionId a = 0; a < mdp.n_actions(); ++a) {
        if (mdp.action_names()[a] == token) return a;
    }
    try {
        std::size_t used = 0;
        const auto i = std::stoul(token, &used);
        if (used == token.size() && i < mdp.n_actions()) return i;
    } catch (const std::exception&) {
    }
    throw DomainError("unknown action '" + token + "'");
}

} // namespace detail

/**
 * Policy from "uniform", "always:<action>" (name or index), or an inline JSON
 * table: either a list of per-state probability lists, or an object mapping
 * state names to {action name: probability}.
 */
inline Policy parse_policy(const Mdp& mdp, const std::string& spec) {
    if (spec == "uniform") return Policy::uniform(mdp);
    if (spec.rfind("always:", 0) == 0) return Policy::always(mdp, detail::action_by_token(mdp, spec.substr(7)));
    const Json root = detail::parse_json(spec, "--policy");
    StateActionTable<double> probs(mdp.n_states(), mdp.n_actions(), 0.0);
    if (root.is_array()) {
        if (root.size() != mdp.n_states()) throw StructuralError("policy table needs one row per state");
        for (StateId x = 0; x < mdp.n_states(); ++x) {
            if (!root[x].is_array() || root[x].size() != mdp.n_actions()) {
                throw StructuralError("policy row " + std::to_string(x) + " needs one entry per action");
            }
            for (ActionId a = 0; a < mdp.n_actions(); ++a) probs(x, a) = root[x][a].get<double>();
        }
    } else if (root.is_object()) {
        for (StateId x = 0; x < mdp.n_states(); ++x) {
            const auto& name = mdp.state_names()[x];
            if (!root.contains(name) || !root[name].is_object()) throw StructuralError("policy table misses state " + name);
            for (const auto& [action, weight] : root[name].items()) {
                probs(x, detail::action_by_token(mdp, action)) = weight.get<double>();
            }
        }
    } else {
        throw StructuralError("policy must be 'uniform', 'always:<action>' or a JSON table");
    }
    return Policy(std::move(probs));
}

/// nu0 from "uniform", a JSON array, or comma-separated weights (normalized when they sum to 1 within 1e-9).
inline std::vector<double> parse_weights(const std::string& spec, std::size_t n_states) {
    if (spec == "uniform") return std::vector<double>(n_states, 1.0 / static_cast<double>(n_states));
    std::vector<double> out;
    if (!spec.empty() && spec.front() == '[') {
        for (const Json& v : detail::parse_json(spec, "--nu0")) out.push_back(v.get<double>());
    } else {
        std::stringstream in(spec);
        std::string item;
        while (std::getline(in, item, ',')) {
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw DomainError("--nu0: cannot read '" + item + "' as a number");
            }
        }
    }
    if (out.size() != n_states) throw StructuralError("--nu0 needs one weight per state");
    return out;
}

} // namespace diatomic
