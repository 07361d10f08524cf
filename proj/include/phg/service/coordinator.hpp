// The coordinator: hosts providers' token indexes, relays blinded
// evaluations between clients and providers, matches reported tokens and
// notifies the affected providers.
//
// Session flow
//   provider: hello -> hello_ack, index_put* (last=true) -> index_ack,
//             then serves blind_eval_req / receives match_notify
//   client:   hello -> hello_ack{providers}, blind_eval_req* -> blind_eval_resp,
//             report_tokens -> report_ack{providers_contacted}
// A message that is not valid in the session's current state gets error 409
// and the session is closed.
#pragma once

#include "phg/psi/token_index.hpp"
#include "phg/service/net.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace phg::service {

struct CoordinatorOptions {
    Endpoint listen{"127.0.0.1", 0};
    /// Indexes persist as <data_dir>/<provider_id>.phix; empty disables
    /// persistence.
    std::filesystem::path data_dir;
    std::chrono::milliseconds relay_timeout{30000};
    /// Observes every line on every session; may be called concurrently.
    TranscriptSink transcript;
};

struct ProviderStatus {
    std::string id;
    bool online = false;
    std::shared_ptr<const psi::TokenIndex> index;
};

class Coordinator {
public:
    explicit Coordinator(CoordinatorOptions options);
    ~Coordinator();

    Coordinator(const Coordinator&) = delete;
    Coordinator& operator=(const Coordinator&) = delete;

    /// Loads persisted indexes, binds the listener and starts accepting.
    void start();
    /// Port actually bound (after start()).
    std::uint16_t port() const;
    /// Closes the listener and every session, then joins all threads.
    void stop();

    std::vector<ProviderStatus> providers() const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

/// Provider ids double as file names: 1-64 of [A-Za-z0-9_-].
bool valid_provider_id(std::string_view id);

}  // namespace phg::service
