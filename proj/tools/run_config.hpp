#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <functional>
#include <map>
#include <stdexcept>
#include <string>

namespace d3net::cli {

/// Bad flags or config values; maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Binds command-line options to JSON config keys. A key is the flag's long
/// name with dashes replaced by underscores. Flags given on the command line
/// win over the config file; keys that match no option are rejected.
class RunConfig {
public:
    template <typename T>
    CLI::Option* option(CLI::App* app, const std::string& flag, T& value, const std::string& help) {
        auto* opt = app->add_option("--" + flag, value, help)->capture_default_str();
        bind(flag, opt, value);
        return opt;
    }

    CLI::Option* flag(CLI::App* app, const std::string& flag, bool& value, const std::string& help) {
        auto* opt = app->add_flag("--" + flag, value, help);
        bind(flag, opt, value);
        return opt;
    }

    /// Registers an option that lives elsewhere (e.g. a global flag).
    template <typename T>
    void bind(const std::string& flag, CLI::Option* opt, T& value) {
        std::string key = flag;
        for (auto& c : key) {
            if (c == '-') c = '_';
        }
        entries_[key] = {opt, [&value](const nlohmann::json& j) { value = j.get<T>(); },
                         [&value] { return nlohmann::json(value); }};
    }

    /// Keeps a key settable from the config file but out of `effective()`
    /// (output locations, thread counts), so echoes match across reruns.
    void hide(const std::string& key) { entries_.at(key).echo = false; }

    void apply(const nlohmann::json& file) {
        if (!file.is_object()) {
            throw UsageError("config file must hold a JSON object");
        }
        for (const auto& [key, value] : file.items()) {
            auto it = entries_.find(key);
            if (it == entries_.end()) {
                throw UsageError("unknown config key '" + key + "'");
            }
            if (it->second.option->count() > 0) {
                continue;
            }
            try {
                it->second.set(value);
            } catch (const nlohmann::json::exception& e) {
                throw UsageError("config key '" + key + "': " + e.what());
            }
        }
    }

    nlohmann::json effective() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [key, e] : entries_) {
            if (e.echo) {
                j[key] = e.get();
            }
        }
        return j;
    }

private:
    struct Entry {
        CLI::Option* option;
        std::function<void(const nlohmann::json&)> set;
        std::function<nlohmann::json()> get;
        bool echo = true;
    };
    std::map<std::string, Entry> entries_;
};

} // namespace d3net::cli
