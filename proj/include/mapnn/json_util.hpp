#pragma once

#include <initializer_list>
#include <string>

#include "json.hpp"
#include "mapnn/error.hpp"

namespace mapnn {

/// Throws InvalidArgument unless `j` is an object whose keys all appear in `allowed`.
inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw InvalidArgument(where + ": expected a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed) known = known || item.key() == k;
        if (!known) throw InvalidArgument(where + ": unknown key '" + item.key() + "'");
    }
}

/// Reads j[key] into `out` when present; wrong types become InvalidArgument.
template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidArgument(where + ": key '" + key + "' has the wrong type");
    }
}

}  // namespace mapnn
