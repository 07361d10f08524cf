#include "phg/service/provider.hpp"

#include "phg/service/coordinator.hpp"

#include "codec.hpp"

#include <condition_variable>
#include <ctime>
#include <fstream>
#include <iostream>
#include <thread>

namespace phg::service {

std::string iso8601_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ProviderAgent::ProviderAgent(ProviderOptions options) : options_(std::move(options)) {
    if (!options_.group) throw std::invalid_argument("provider needs a group");
    if (!options_.index) throw std::invalid_argument("provider needs an index");
    if (!valid_provider_id(options_.provider_id)) {
        throw std::invalid_argument("invalid provider id '" + options_.provider_id + "'");
    }
    if (options_.index->key_id() != options_.key.id) {
        throw std::invalid_argument("index was built with a different key (key_id " +
                                    to_hex(options_.index->key_id()) + ", key " +
                                    to_hex(options_.key.id) + ")");
    }
}

void ProviderAgent::run() {
    while (!stopping_) {
        try {
            serve_once();
        } catch (const std::exception& e) {
            if (!stopping_) std::cerr << "provider " << options_.provider_id << ": " << e.what() << "\n";
        }
        {
            std::lock_guard lock(channel_mutex_);
            channel_.reset();
        }
        if (stopping_) break;
        // Sleep in small steps so stop() is prompt.
        const auto until = std::chrono::steady_clock::now() + options_.reconnect_delay;
        while (!stopping_ && std::chrono::steady_clock::now() < until) {
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
    }
}

void ProviderAgent::stop() {
    stopping_ = true;
    std::lock_guard lock(channel_mutex_);
    if (channel_) channel_->shutdown();
}

void ProviderAgent::serve_once() {
    auto channel = std::make_shared<LineChannel>(connect_tcp(options_.coordinator), options_.transcript);
    {
        std::lock_guard lock(channel_mutex_);
        if (stopping_) return;
        channel_ = channel;
    }
    const auto& index = *options_.index;
    channel->send(make_message(MessageType::Hello, {{"role", "provider"},
                                                    {"proto", kProtocolVersion},
                                                    {"provider_id", options_.provider_id},
                                                    {"algo", phash::algorithm_tag(index.algorithm())},
                                                    {"key_id", to_hex(index.key_id())}}));
    auto expect = [&](MessageType type) {
        auto reply = channel->receive();
        if (!reply) throw NetError("coordinator closed the connection");
        if (reply->type == MessageType::Error) {
            throw std::runtime_error("coordinator error " + reply->payload.value("code", nlohmann::json(0)).dump() +
                                     ": " + reply->payload.value("message", std::string()));
        }
        if (reply->type != type) {
            throw std::runtime_error("unexpected " + std::string(type_name(reply->type)));
        }
        return *reply;
    };
    const auto session = expect(MessageType::HelloAck).session;

    const auto tokens = index.tokens();
    std::size_t offset = 0;
    do {
        const auto n = std::min(kMaxTokensPerMessage, tokens.size() - offset);
        const auto chunk = tokens.subspan(offset, n);
        offset += n;
        channel->send(make_message(MessageType::IndexPut,
                                   {{"tokens", detail::octets_to_json<32>(chunk)},
                                    {"last", offset == tokens.size()}},
                                   session));
    } while (offset < tokens.size());
    const auto ack = expect(MessageType::IndexAck);
    if (ack.payload.value("count", std::size_t{0}) != tokens.size()) {
        throw std::runtime_error("coordinator acknowledged the wrong token count");
    }
    ++uploads_;

    while (auto msg = channel->receive()) {
        switch (msg->type) {
            case MessageType::BlindEvalReq: {
                const auto relay_id = msg->payload.value("relay_id", nlohmann::json());
                try {
                    const auto elements = detail::elements_from_json(
                        msg->payload.value("elements", nlohmann::json::array()), kMaxTokensPerMessage);
                    std::vector<psi::Element> evaluated;
                    evaluated.reserve(elements.size());
                    for (const auto& e : elements) {
                        evaluated.push_back(psi::evaluate(*options_.group, e, options_.key));
                    }
                    channel->send(make_message(MessageType::BlindEvalResp,
                                               {{"relay_id", relay_id},
                                                {"elements", detail::elements_to_json(evaluated)}},
                                               session));
                } catch (const std::exception& e) {
                    auto err = make_error(error_code::kUnprocessable, e.what(), session);
                    err.payload["relay_id"] = relay_id;
                    channel->send(err);
                }
                break;
            }
            case MessageType::MatchNotify: {
                std::vector<psi::Token> matched;
                try {
                    matched = detail::tokens_from_json(
                        msg->payload.value("tokens", nlohmann::json::array()), kMaxLineBytes);
                } catch (const std::exception& e) {
                    std::cerr << "provider " << options_.provider_id << ": bad match_notify: " << e.what() << "\n";
                    break;
                }
                std::ofstream log(options_.match_log, std::ios::app);
                const auto stamp = iso8601_now();
                for (const auto& t : matched) {
                    const auto it = options_.reverse.find(t);
                    if (it == options_.reverse.end()) {
                        std::cerr << "provider " << options_.provider_id
                                  << ": warning: matched token not in reverse map: " << to_base64(t) << "\n";
                        continue;
                    }
                    log << it->second.to_text() << '\t' << stamp << '\n';
                    ++logged_;
                }
                log.flush();
                break;
            }
            case MessageType::Error:
                std::cerr << "provider " << options_.provider_id << ": coordinator error: "
                          << msg->payload.value("message", std::string()) << "\n";
                break;
            default:
                std::cerr << "provider " << options_.provider_id << ": ignoring "
                          << type_name(msg->type) << "\n";
        }
    }
    throw NetError("coordinator closed the connection");
}

}  // namespace phg::service
