#include "phg/service/wire.hpp"

#include <array>
#include <utility>

namespace phg::service {

namespace {

constexpr std::array<std::pair<MessageType, std::string_view>, 10> kTypeNames{{
    {MessageType::Hello, "hello"},
    {MessageType::HelloAck, "hello_ack"},
    {MessageType::IndexPut, "index_put"},
    {MessageType::IndexAck, "index_ack"},
    {MessageType::BlindEvalReq, "blind_eval_req"},
    {MessageType::BlindEvalResp, "blind_eval_resp"},
    {MessageType::ReportTokens, "report_tokens"},
    {MessageType::ReportAck, "report_ack"},
    {MessageType::MatchNotify, "match_notify"},
    {MessageType::Error, "error"},
}};

}  // namespace

std::string_view type_name(MessageType t) {
    for (const auto& [type, name] : kTypeNames) {
        if (type == t) return name;
    }
    return "error";
}

std::optional<MessageType> parse_type(std::string_view name) {
    for (const auto& [type, n] : kTypeNames) {
        if (n == name) return type;
    }
    return std::nullopt;
}

WireMessage make_message(MessageType type, nlohmann::json payload, std::string session) {
    return WireMessage{type, std::move(session), std::move(payload)};
}

WireMessage make_error(int code, std::string_view message, std::string session) {
    return make_message(MessageType::Error, {{"code", code}, {"message", message}},
                        std::move(session));
}

std::string encode_message(const WireMessage& m) {
    nlohmann::json obj = m.payload.is_object() ? m.payload : nlohmann::json::object();
    obj["type"] = type_name(m.type);
    if (!m.session.empty()) obj["session"] = m.session;
    auto line = obj.dump();
    line.push_back('\n');
    return line;
}

WireMessage decode_message(std::string_view line) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    if (line.size() > kMaxLineBytes) {
        throw WireError(WireError::Kind::Oversize,
                        "line of " + std::to_string(line.size()) + " bytes exceeds 1 MiB");
    }
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw WireError(WireError::Kind::Malformed, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw WireError(WireError::Kind::Malformed, "message is not an object");
    const auto type_it = obj.find("type");
    if (type_it == obj.end() || !type_it->is_string()) {
        throw WireError(WireError::Kind::Malformed, "message has no type");
    }
    const auto type = parse_type(type_it->get<std::string>());
    if (!type) {
        throw WireError(WireError::Kind::UnknownType,
                        "unknown message type '" + type_it->get<std::string>() + "'");
    }
    WireMessage m;
    m.type = *type;
    if (const auto s = obj.find("session"); s != obj.end()) {
        if (!s->is_string()) throw WireError(WireError::Kind::Malformed, "session must be a string");
        m.session = s->get<std::string>();
    }
    obj.erase("type");
    obj.erase("session");
    m.payload = std::move(obj);
    return m;
}

}  // namespace phg::service
