#include "phg/service/coordinator.hpp"

#include "codec.hpp"

#include <sodium.h>

#include <atomic>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

namespace phg::service {

using detail::require;
using detail::SessionError;

bool valid_provider_id(std::string_view id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

namespace {

// A provider's live connection. Client sessions use it to relay evaluation
// requests; replies are matched back by relay id.
struct ProviderLink {
    std::string id;
    std::shared_ptr<LineChannel> channel;

    std::mutex mutex;
    std::map<std::uint64_t, std::promise<WireMessage>> pending;
    bool alive = true;

    std::optional<std::future<WireMessage>> expect(std::uint64_t relay_id) {
        std::lock_guard lock(mutex);
        if (!alive) return std::nullopt;
        return pending[relay_id].get_future();
    }

    void forget(std::uint64_t relay_id) {
        std::lock_guard lock(mutex);
        pending.erase(relay_id);
    }

    void resolve(std::uint64_t relay_id, WireMessage reply) {
        std::lock_guard lock(mutex);
        const auto it = pending.find(relay_id);
        if (it == pending.end()) return;
        it->second.set_value(std::move(reply));
        pending.erase(it);
    }

    void close() {
        std::lock_guard lock(mutex);
        alive = false;
        for (auto& [id, promise] : pending) {
            promise.set_value(make_error(error_code::kBadGateway, "provider disconnected"));
        }
        pending.clear();
    }
};

struct ProviderEntry {
    std::shared_ptr<const psi::TokenIndex> index;
    std::shared_ptr<ProviderLink> link;
};

// What a client session sees for one provider, fixed at hello time.
struct ProviderView {
    std::shared_ptr<const psi::TokenIndex> index;
    std::shared_ptr<ProviderLink> link;
};

std::string random_session_id() {
    ensure_sodium();
    std::array<std::uint8_t, 12> raw{};
    randombytes_buf(raw.data(), raw.size());
    return to_hex(raw);
}

enum class ProviderState { Hello, Uploading, Serving };
enum class ClientState { Hello, Evaluating, Reporting, Done };

}  // namespace

struct Coordinator::Impl {
    CoordinatorOptions options;
    std::unique_ptr<Listener> listener;
    std::thread accept_thread;
    std::atomic<bool> stopping{false};
    std::atomic<std::uint64_t> next_relay{1};

    mutable std::mutex registry_mutex;
    std::map<std::string, ProviderEntry> registry;

    struct Session {
        std::thread thread;
        std::shared_ptr<LineChannel> channel;
    };
    std::mutex sessions_mutex;
    std::map<std::uint64_t, Session> sessions;
    std::vector<std::uint64_t> finished;
    std::uint64_t next_session = 1;

    explicit Impl(CoordinatorOptions opts) : options(std::move(opts)) {}

    void load_persisted() {
        if (options.data_dir.empty()) return;
        std::error_code ec;
        std::filesystem::create_directories(options.data_dir, ec);
        if (!std::filesystem::is_directory(options.data_dir)) return;
        for (const auto& entry : std::filesystem::directory_iterator(options.data_dir)) {
            if (entry.path().extension() != ".phix") continue;
            const auto id = entry.path().stem().string();
            if (!valid_provider_id(id)) continue;
            try {
                auto index = std::make_shared<const psi::TokenIndex>(psi::TokenIndex::load(entry.path()));
                std::lock_guard lock(registry_mutex);
                registry[id] = ProviderEntry{std::move(index), nullptr};
            } catch (const std::exception& e) {
                std::cerr << "coordinator: skipping " << entry.path() << ": " << e.what() << "\n";
            }
        }
    }

    void persist(const std::string& id, const psi::TokenIndex& index) {
        if (options.data_dir.empty()) return;
        std::filesystem::create_directories(options.data_dir);
        const auto final_path = options.data_dir / (id + ".phix");
        const auto tmp_path = options.data_dir / (id + ".phix.tmp");
        index.save(tmp_path);
        std::filesystem::rename(tmp_path, final_path);
    }

    void reap_finished() {
        std::vector<std::thread> done;
        {
            std::lock_guard lock(sessions_mutex);
            for (auto id : finished) {
                auto it = sessions.find(id);
                if (it == sessions.end()) continue;
                done.push_back(std::move(it->second.thread));
                sessions.erase(it);
            }
            finished.clear();
        }
        for (auto& t : done) t.join();
    }

    void accept_loop() {
        while (!stopping) {
            auto sock = listener->accept();
            if (!sock || stopping) break;
            reap_finished();
            auto channel = std::make_shared<LineChannel>(std::move(*sock), options.transcript);
            std::lock_guard lock(sessions_mutex);
            const auto id = next_session++;
            sessions[id] = Session{std::thread([this, id, channel] {
                                       run_session(*channel);
                                       std::lock_guard l(sessions_mutex);
                                       finished.push_back(id);
                                   }),
                                   channel};
        }
    }

    void run_session(LineChannel& channel) {
        const auto session_id = random_session_id();
        try {
            auto first = channel.receive();
            if (!first) return;
            if (first->type != MessageType::Hello) {
                throw SessionError(error_code::kConflict, "expected hello");
            }
            const auto role = require<std::string>(first->payload, "role");
            if (require<int>(first->payload, "proto") != kProtocolVersion) {
                throw SessionError(error_code::kBadRequest, "unsupported protocol version");
            }
            if (role == "provider") {
                provider_session(channel, session_id, *first);
            } else if (role == "client") {
                client_session(channel, session_id, *first);
            } else {
                throw SessionError(error_code::kBadRequest, "unknown role '" + role + "'");
            }
        } catch (const SessionError& e) {
            try_send(channel, make_error(e.code(), e.what(), session_id));
        } catch (const WireError& e) {
            try_send(channel, make_error(e.code(), e.what(), session_id));
        } catch (const NetError&) {
            // Peer went away; nothing to report.
        } catch (const std::exception& e) {
            try_send(channel, make_error(error_code::kInternal, e.what(), session_id));
        }
        channel.shutdown();
    }

    static void try_send(LineChannel& channel, const WireMessage& m) {
        try {
            channel.send(m);
        } catch (const std::exception&) {
        }
    }

    static phash::HashAlgorithm require_algorithm(const nlohmann::json& payload) {
        try {
            return phash::parse_algorithm(require<std::string>(payload, "algo"));
        } catch (const std::invalid_argument& e) {
            throw SessionError(error_code::kBadRequest, e.what());
        }
    }

    // ---- provider role ------------------------------------------------------

    void provider_session(LineChannel& channel, const std::string& session_id,
                          const WireMessage& hello) {
        const auto provider_id = require<std::string>(hello.payload, "provider_id");
        if (!valid_provider_id(provider_id)) {
            throw SessionError(error_code::kBadRequest, "invalid provider_id");
        }
        const auto alg = require_algorithm(hello.payload);
        psi::KeyId key_id{};
        try {
            const auto raw = from_hex(require<std::string>(hello.payload, "key_id"));
            if (raw.size() != key_id.size()) throw std::invalid_argument("size");
            std::copy(raw.begin(), raw.end(), key_id.begin());
        } catch (const std::invalid_argument&) {
            throw SessionError(error_code::kBadRequest, "key_id must be 16 hex digits");
        }

        auto link = std::make_shared<ProviderLink>();
        link->id = provider_id;
        // Non-owning alias: the session owns the channel for its lifetime.
        link->channel = std::shared_ptr<LineChannel>(std::shared_ptr<void>{}, &channel);
        channel.send(make_message(MessageType::HelloAck, nlohmann::json::object(), session_id));

        ProviderState state = ProviderState::Hello;
        std::vector<psi::Token> upload;
        try {
            while (auto msg = channel.receive()) {
                switch (msg->type) {
                    case MessageType::IndexPut: {
                        auto chunk = detail::tokens_from_json(
                            msg->payload.value("tokens", nlohmann::json::array()),
                            kMaxTokensPerMessage);
                        if (state != ProviderState::Uploading) upload.clear();
                        state = ProviderState::Uploading;
                        upload.insert(upload.end(), chunk.begin(), chunk.end());
                        if (msg->payload.value("last", false)) {
                            auto index = std::make_shared<const psi::TokenIndex>(
                                alg, key_id, std::move(upload));
                            upload = {};
                            persist(provider_id, *index);
                            install(provider_id, index, link);
                            channel.send(make_message(MessageType::IndexAck,
                                                      {{"count", index->size()}}, session_id));
                            state = ProviderState::Serving;
                        }
                        break;
                    }
                    case MessageType::BlindEvalResp:
                    case MessageType::Error: {
                        if (state != ProviderState::Serving || !msg->payload.contains("relay_id")) {
                            if (msg->type == MessageType::Error) break;
                            throw SessionError(error_code::kConflict,
                                               "blind_eval_resp before the index is installed");
                        }
                        link->resolve(require<std::uint64_t>(msg->payload, "relay_id"), *msg);
                        break;
                    }
                    default:
                        throw SessionError(error_code::kConflict,
                                           std::string(type_name(msg->type)) +
                                               " is not valid in a provider session");
                }
            }
        } catch (...) {
            retire(provider_id, link);
            throw;
        }
        retire(provider_id, link);
    }

    // Atomically swaps in a provider's new index and connection.
    void install(const std::string& id, std::shared_ptr<const psi::TokenIndex> index,
                 std::shared_ptr<ProviderLink> link) {
        std::lock_guard lock(registry_mutex);
        registry[id] = ProviderEntry{std::move(index), std::move(link)};
    }

    void retire(const std::string& id, const std::shared_ptr<ProviderLink>& link) {
        link->close();
        std::lock_guard lock(registry_mutex);
        if (auto it = registry.find(id); it != registry.end() && it->second.link == link) {
            it->second.link.reset();
        }
    }

    // ---- client role --------------------------------------------------------

    void client_session(LineChannel& channel, const std::string& session_id,
                        const WireMessage& hello) {
        const auto alg = require_algorithm(hello.payload);

        std::map<std::string, ProviderView> view;
        {
            std::lock_guard lock(registry_mutex);
            for (const auto& [id, entry] : registry) {
                if (entry.link && entry.index && entry.index->algorithm() == alg) {
                    view[id] = ProviderView{entry.index, entry.link};
                }
            }
        }
        auto listing = nlohmann::json::array();
        for (const auto& [id, v] : view) {
            listing.push_back({{"id", id}, {"key_id", to_hex(v.index->key_id())}});
        }
        channel.send(make_message(MessageType::HelloAck, {{"providers", listing}}, session_id));

        ClientState state = ClientState::Hello;
        std::map<std::string, std::vector<psi::Token>> reported;
        while (auto msg = channel.receive()) {
            if (state == ClientState::Done) {
                throw SessionError(error_code::kConflict, "session already completed");
            }
            switch (msg->type) {
                case MessageType::BlindEvalReq: {
                    if (state == ClientState::Reporting) {
                        throw SessionError(error_code::kConflict, "blind_eval_req after report_tokens");
                    }
                    const auto provider_id = require<std::string>(msg->payload, "provider_id");
                    const auto it = view.find(provider_id);
                    if (it == view.end()) {
                        throw SessionError(error_code::kNotFound, "unknown provider " + provider_id);
                    }
                    const auto elements = detail::elements_from_json(
                        msg->payload.value("elements", nlohmann::json::array()), kMaxTokensPerMessage);
                    const auto evaluated = relay(it->second, elements);
                    channel.send(make_message(MessageType::BlindEvalResp,
                                              {{"provider_id", provider_id},
                                               {"elements", detail::elements_to_json(evaluated)}},
                                              session_id));
                    state = ClientState::Evaluating;
                    break;
                }
                case MessageType::ReportTokens: {
                    state = ClientState::Reporting;
                    collect_reports(view, msg->payload, reported);
                    if (!msg->payload.value("last", true)) break;
                    for (const auto& [id, tokens] : reported) {
                        const auto matched = psi::intersect(tokens, *view.at(id).index);
                        if (!matched.empty()) notify(id, view.at(id), matched);
                    }
                    channel.send(make_message(MessageType::ReportAck,
                                              {{"providers_contacted", reported.size()}}, session_id));
                    state = ClientState::Done;
                    break;
                }
                default:
                    throw SessionError(error_code::kConflict, std::string(type_name(msg->type)) +
                                                                  " is not valid in a client session");
            }
        }
    }

    std::vector<psi::Element> relay(const ProviderView& provider,
                                    const std::vector<psi::Element>& elements) {
        const auto relay_id = next_relay++;
        auto future = provider.link->expect(relay_id);
        if (!future) throw SessionError(error_code::kBadGateway, "provider is offline");
        try {
            provider.link->channel->send(make_message(
                MessageType::BlindEvalReq,
                {{"relay_id", relay_id}, {"elements", detail::elements_to_json(elements)}}));
        } catch (const std::exception&) {
            provider.link->forget(relay_id);
            throw SessionError(error_code::kBadGateway, "provider is unreachable");
        }
        if (future->wait_for(options.relay_timeout) != std::future_status::ready) {
            provider.link->forget(relay_id);
            throw SessionError(error_code::kBadGateway, "provider did not answer in time");
        }
        const auto reply = future->get();
        if (reply.type != MessageType::BlindEvalResp) {
            throw SessionError(error_code::kBadGateway,
                               "provider rejected the evaluation: " +
                                   reply.payload.value("message", std::string("error")));
        }
        std::vector<psi::Element> evaluated;
        try {
            evaluated = detail::elements_from_json(
                reply.payload.value("elements", nlohmann::json::array()), kMaxTokensPerMessage);
        } catch (const SessionError&) {
            throw SessionError(error_code::kBadGateway, "provider sent a malformed evaluation");
        }
        if (evaluated.size() != elements.size()) {
            throw SessionError(error_code::kBadGateway, "provider answered with the wrong count");
        }
        return evaluated;
    }

    static void collect_reports(const std::map<std::string, ProviderView>& view,
                                const nlohmann::json& payload,
                                std::map<std::string, std::vector<psi::Token>>& reported) {
        const auto reports = payload.value("reports", nlohmann::json::array());
        if (!reports.is_array()) throw SessionError(error_code::kBadRequest, "reports must be an array");
        std::size_t total = 0;
        for (const auto& report : reports) {
            if (!report.is_object()) throw SessionError(error_code::kBadRequest, "report must be an object");
            const auto id = require<std::string>(report, "provider_id");
            if (!view.contains(id)) throw SessionError(error_code::kNotFound, "unknown provider " + id);
            auto tokens = detail::tokens_from_json(report.value("tokens", nlohmann::json::array()),
                                                   kMaxTokensPerMessage);
            total += tokens.size();
            if (total > kMaxTokensPerMessage) {
                throw SessionError(error_code::kTooLarge, "too many tokens in one message");
            }
            auto& into = reported[id];
            into.insert(into.end(), tokens.begin(), tokens.end());
        }
    }

    void notify(const std::string& id, const ProviderView& provider,
                const std::vector<psi::Token>& matched) {
        // Prefer the provider's current connection; the one seen at hello may
        // have been replaced by a reconnect since.
        std::shared_ptr<ProviderLink> link;
        {
            std::lock_guard lock(registry_mutex);
            if (auto it = registry.find(id); it != registry.end()) link = it->second.link;
        }
        if (!link) link = provider.link;
        try {
            const std::span<const psi::Token> all(matched);
            for (std::size_t off = 0; off < all.size(); off += kMaxTokensPerMessage) {
                const auto n = std::min(kMaxTokensPerMessage, all.size() - off);
                link->channel->send(make_message(
                    MessageType::MatchNotify,
                    {{"provider_id", id}, {"tokens", detail::octets_to_json<32>(all.subspan(off, n))}}));
            }
        } catch (const std::exception& e) {
            std::cerr << "coordinator: could not notify provider " << id << ": " << e.what() << "\n";
        }
    }
};

Coordinator::Coordinator(CoordinatorOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

Coordinator::~Coordinator() { stop(); }

void Coordinator::start() {
    impl_->load_persisted();
    impl_->listener = std::make_unique<Listener>(impl_->options.listen);
    impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

std::uint16_t Coordinator::port() const {
    return impl_->listener ? impl_->listener->port() : 0;
}

void Coordinator::stop() {
    if (!impl_ || !impl_->listener || impl_->stopping.exchange(true)) return;
    impl_->listener->close();
    if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
    std::map<std::uint64_t, Impl::Session> sessions;
    {
        std::lock_guard lock(impl_->sessions_mutex);
        for (auto& [id, s] : impl_->sessions) s.channel->shutdown();
    }
    // Session threads take sessions_mutex on exit, so join outside the lock.
    {
        std::lock_guard lock(impl_->sessions_mutex);
        sessions.swap(impl_->sessions);
    }
    for (auto& [id, s] : sessions) {
        if (s.thread.joinable()) s.thread.join();
    }
}

std::vector<ProviderStatus> Coordinator::providers() const {
    std::lock_guard lock(impl_->registry_mutex);
    std::vector<ProviderStatus> out;
    for (const auto& [id, entry] : impl_->registry) {
        out.push_back({id, entry.link != nullptr, entry.index});
    }
    return out;
}

}  // namespace phg::service
