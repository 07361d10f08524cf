// Line-delimited JSON wire protocol shared by client, coordinator and
// provider. One UTF-8 JSON object per LF-terminated line, at most 1 MiB.
#pragma once

#include "json.hpp"

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace phg::service {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxLineBytes = 1 << 20;
inline constexpr std::size_t kMaxTokensPerMessage = 1000;

enum class MessageType {
    Hello,
    HelloAck,
    IndexPut,
    IndexAck,
    BlindEvalReq,
    BlindEvalResp,
    ReportTokens,
    ReportAck,
    MatchNotify,
    Error,
};

std::string_view type_name(MessageType t);
std::optional<MessageType> parse_type(std::string_view name);

namespace error_code {
inline constexpr int kBadRequest = 400;
inline constexpr int kNotFound = 404;
inline constexpr int kConflict = 409;  // message not valid in the session's state
inline constexpr int kTooLarge = 413;
inline constexpr int kUnprocessable = 422;
inline constexpr int kInternal = 500;
inline constexpr int kBadGateway = 502;
}  // namespace error_code

class WireError : public std::runtime_error {
public:
    enum class Kind { Malformed, Oversize, UnknownType };

    WireError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }
    /// The error code a peer should receive for this failure.
    int code() const noexcept {
        return kind_ == Kind::Oversize ? error_code::kTooLarge : error_code::kBadRequest;
    }

private:
    Kind kind_;
};

struct WireMessage {
    MessageType type = MessageType::Error;
    std::string session;
    nlohmann::json payload = nlohmann::json::object();  // every field except type/session

    friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

WireMessage make_message(MessageType type, nlohmann::json payload = nlohmann::json::object(),
                         std::string session = {});
WireMessage make_error(int code, std::string_view message, std::string session = {});

/// Serialized object followed by '\n'.
std::string encode_message(const WireMessage& m);

/// Accepts the line with or without its trailing LF. Unknown fields are kept
/// in the payload and otherwise ignored.
WireMessage decode_message(std::string_view line);

}  // namespace phg::service
