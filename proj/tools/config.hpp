#pragma once

// Strict reader over a JSON config: every field read is copied, with its default when
// absent, into a resolved document; keys that were never read are rejected.

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace fca::cli {

using json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Block {
public:
    Block(const json& in, json& out, std::string path) : in_(in), out_(out), path_(std::move(path)) {
        if (!in_.is_object()) throw ConfigError("'" + display() + "' must be an object");
        if (!out_.is_object()) out_ = json::object();
    }

    bool has(const std::string& k) const { return in_.contains(k) && !in_.at(k).is_null(); }

    const json& raw(const std::string& k) {
        used_.insert(k);
        if (!has(k)) throw ConfigError("missing required field '" + name(k) + "'");
        out_[k] = in_.at(k);
        return in_.at(k);
    }

    template <class T>
    T get(const std::string& k) {
        used_.insert(k);
        if (!has(k)) throw ConfigError("missing required field '" + name(k) + "'");
        return convert<T>(k);
    }

    template <class T>
    T get(const std::string& k, T def) {
        used_.insert(k);
        if (!has(k)) {
            out_[k] = def;
            return def;
        }
        return convert<T>(k);
    }

    /// Positive integer (accepts 1e6-style numbers).
    std::size_t count(const std::string& k, std::optional<std::size_t> def = std::nullopt) {
        used_.insert(k);
        if (!has(k)) {
            if (!def) throw ConfigError("missing required field '" + name(k) + "'");
            out_[k] = *def;
            return *def;
        }
        const auto& v = in_.at(k);
        if (!v.is_number()) throw ConfigError("field '" + name(k) + "' must be a positive integer");
        const double d = v.get<double>();
        if (!(d >= 1.0) || d != static_cast<double>(static_cast<std::size_t>(d)))
            throw ConfigError("field '" + name(k) + "' must be a positive integer");
        const auto n = static_cast<std::size_t>(d);
        out_[k] = n;
        return n;
    }

    Block child(const std::string& k) {
        used_.insert(k);
        if (!has(k)) throw ConfigError("missing required field '" + name(k) + "'");
        return Block(in_.at(k), out_[k], name(k));
    }

    std::optional<Block> optional_child(const std::string& k) {
        used_.insert(k);
        if (!has(k)) return std::nullopt;
        return Block(in_.at(k), out_[k], name(k));
    }

    /// Empty object when absent, so that defaults are still recorded.
    Block child_or_empty(const std::string& k) {
        used_.insert(k);
        if (!has(k)) {
            out_[k] = json::object();
            return Block(empty(), out_[k], name(k));
        }
        return Block(in_.at(k), out_[k], name(k));
    }

    void ignore(const std::string& k) { used_.insert(k); }

    void finish() const {
        for (const auto& [k, v] : in_.items()) {
            if (!used_.count(k)) throw ConfigError("unknown key '" + name(k) + "'");
        }
    }

    std::string name(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

private:
    static const json& empty() {
        static const json e = json::object();
        return e;
    }

    std::string display() const { return path_.empty() ? "config" : path_; }

    template <class T>
    T convert(const std::string& k) {
        const auto& v = in_.at(k);
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError("");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError("");
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                if (!v.is_array()) throw ConfigError("");
                for (const auto& e : v)
                    if (!e.is_number()) throw ConfigError("");
            }
            T out = v.template get<T>();
            out_[k] = v;
            return out;
        } catch (const std::exception&) {
            throw ConfigError("field '" + name(k) + "' has the wrong type");
        }
    }

    const json& in_;
    json& out_;
    std::string path_;
    std::set<std::string> used_;
};

}  // namespace fca::cli
