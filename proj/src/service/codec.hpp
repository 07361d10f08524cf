// Helpers shared by the service roles for moving binary values through JSON.
#pragma once

#include "phg/encoding.hpp"
#include "phg/psi/group.hpp"
#include "phg/psi/oprf.hpp"
#include "phg/service/wire.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace phg::service::detail {

/// A protocol violation to be reported to the peer before the session ends.
class SessionError : public std::runtime_error {
public:
    SessionError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

template <std::size_t N>
nlohmann::json octets_to_json(std::span<const std::array<std::uint8_t, N>> items) {
    auto arr = nlohmann::json::array();
    for (const auto& item : items) arr.push_back(to_base64(item));
    return arr;
}

inline nlohmann::json elements_to_json(std::span<const psi::Element> elements) {
    auto arr = nlohmann::json::array();
    for (const auto& e : elements) arr.push_back(to_base64(e.bytes));
    return arr;
}

/// Decodes a JSON array of base64 strings that must each be 32 octets.
inline std::vector<psi::Octets32> octets_from_json(const nlohmann::json& value,
                                                   std::size_t max_items, const char* field) {
    if (!value.is_array()) {
        throw SessionError(error_code::kBadRequest, std::string(field) + " must be an array");
    }
    if (value.size() > max_items) {
        throw SessionError(error_code::kTooLarge, std::string(field) + " has too many entries");
    }
    std::vector<psi::Octets32> out;
    out.reserve(value.size());
    for (const auto& item : value) {
        if (!item.is_string()) {
            throw SessionError(error_code::kBadRequest, std::string(field) + " entries must be strings");
        }
        std::vector<std::uint8_t> raw;
        try {
            raw = from_base64(item.get<std::string>());
        } catch (const std::invalid_argument&) {
            throw SessionError(error_code::kBadRequest, std::string(field) + " has invalid base64");
        }
        if (raw.size() != 32) {
            throw SessionError(error_code::kBadRequest, std::string(field) + " entries must be 32 octets");
        }
        psi::Octets32 o{};
        std::copy(raw.begin(), raw.end(), o.begin());
        out.push_back(o);
    }
    return out;
}

inline std::vector<psi::Element> elements_from_json(const nlohmann::json& value,
                                                    std::size_t max_items) {
    std::vector<psi::Element> out;
    for (const auto& o : octets_from_json(value, max_items, "elements")) out.push_back({o});
    return out;
}

inline std::vector<psi::Token> tokens_from_json(const nlohmann::json& value, std::size_t max_items) {
    return octets_from_json(value, max_items, "tokens");
}

/// Field accessor that turns a missing or mistyped field into a 400.
template <typename T>
T require(const nlohmann::json& payload, const char* field) {
    const auto it = payload.find(field);
    if (it == payload.end()) {
        throw SessionError(error_code::kBadRequest, std::string("missing field '") + field + "'");
    }
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw SessionError(error_code::kBadRequest, std::string("field '") + field + "' has the wrong type");
    }
}

}  // namespace phg::service::detail
