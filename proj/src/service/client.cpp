#include "phg/service/client.hpp"

#include "codec.hpp"

namespace phg::service {

namespace {

WireMessage expect(LineChannel& channel, MessageType type) {
    std::optional<WireMessage> reply;
    try {
        reply = channel.receive();
    } catch (const NetError& e) {
        throw ConnectionFailed(e.what());
    } catch (const WireError& e) {
        throw ProtocolError(e.code(), e.what());
    }
    if (!reply) throw ConnectionFailed("coordinator closed the connection");
    if (reply->type == MessageType::Error) {
        const auto code = reply->payload.value("code", error_code::kInternal);
        throw ProtocolError(code, reply->payload.value("message", std::string("error")));
    }
    if (reply->type != type) {
        throw ProtocolError(error_code::kConflict,
                            "expected " + std::string(type_name(type)) + ", got " +
                                std::string(type_name(reply->type)));
    }
    return *reply;
}

void send(LineChannel& channel, const WireMessage& m) {
    try {
        channel.send(m);
    } catch (const NetError& e) {
        throw ConnectionFailed(e.what());
    }
}

}  // namespace

ReportReceipt client_report(const Endpoint& coordinator, const psi::GroupOps& group,
                            const std::vector<phash::PerceptualHash>& x, TranscriptSink transcript) {
    if (x.size() > kMaxClientSet) {
        throw std::invalid_argument("at most " + std::to_string(kMaxClientSet) + " hashes per report");
    }
    // Validates non-emptiness and a single algorithm before connecting.
    const auto alg = psi::ClientSet::create(group, x).algorithm();

    Socket sock;
    try {
        sock = connect_tcp(coordinator);
    } catch (const NetError& e) {
        throw ConnectionFailed(e.what());
    }
    LineChannel channel(std::move(sock), std::move(transcript));

    send(channel, make_message(MessageType::Hello, {{"role", "client"},
                                                    {"proto", kProtocolVersion},
                                                    {"algo", phash::algorithm_tag(alg)}}));
    const auto ack = expect(channel, MessageType::HelloAck);
    const auto session = ack.session;
    const auto providers = ack.payload.value("providers", nlohmann::json::array());
    if (!providers.is_array()) throw ProtocolError(error_code::kBadRequest, "malformed provider list");

    std::vector<std::pair<std::string, std::vector<psi::Token>>> reports;
    for (const auto& p : providers) {
        const auto id = p.value("id", std::string());
        if (id.empty()) throw ProtocolError(error_code::kBadRequest, "provider without id");
        // Fresh blinds per provider so sessions with different providers are
        // unlinkable.
        const auto set = psi::ClientSet::create(group, x);
        const auto blinded = set.blinded_elements(group);
        std::vector<psi::Element> evaluated;
        evaluated.reserve(blinded.size());
        for (std::size_t off = 0; off < blinded.size(); off += kMaxTokensPerMessage) {
            const auto n = std::min(kMaxTokensPerMessage, blinded.size() - off);
            send(channel, make_message(MessageType::BlindEvalReq,
                                       {{"provider_id", id},
                                        {"elements", detail::elements_to_json(
                                                         std::span(blinded).subspan(off, n))}},
                                       session));
            const auto resp = expect(channel, MessageType::BlindEvalResp);
            std::vector<psi::Element> chunk;
            try {
                chunk = detail::elements_from_json(
                    resp.payload.value("elements", nlohmann::json::array()), kMaxTokensPerMessage);
            } catch (const detail::SessionError& e) {
                throw ProtocolError(e.code(), e.what());
            }
            if (chunk.size() != n) throw ProtocolError(error_code::kBadGateway, "evaluation count mismatch");
            evaluated.insert(evaluated.end(), chunk.begin(), chunk.end());
        }
        std::vector<psi::Token> tokens;
        try {
            tokens = set.finalize(group, evaluated);
        } catch (const psi::InvalidElement& e) {
            throw ProtocolError(error_code::kBadGateway, e.what());
        }
        reports.emplace_back(id, std::move(tokens));
    }

    // One report_tokens message per chunk of at most kMaxTokensPerMessage
    // tokens; the coordinator acks after the one flagged last.
    std::vector<nlohmann::json> messages(1, nlohmann::json::array());
    std::size_t in_message = 0;
    for (const auto& [id, tokens] : reports) {
        for (std::size_t off = 0; off < tokens.size(); off += kMaxTokensPerMessage) {
            const auto n = std::min(kMaxTokensPerMessage, tokens.size() - off);
            if (in_message + n > kMaxTokensPerMessage) {
                messages.push_back(nlohmann::json::array());
                in_message = 0;
            }
            messages.back().push_back(
                {{"provider_id", id},
                 {"tokens", detail::octets_to_json<32>(std::span(tokens).subspan(off, n))}});
            in_message += n;
        }
    }
    for (std::size_t i = 0; i < messages.size(); ++i) {
        send(channel, make_message(MessageType::ReportTokens,
                                   {{"reports", messages[i]}, {"last", i + 1 == messages.size()}},
                                   session));
    }
    const auto done = expect(channel, MessageType::ReportAck);
    channel.shutdown();
    return ReportReceipt{done.payload.value("providers_contacted", std::size_t{0}), x.size()};
}

}  // namespace phg::service
