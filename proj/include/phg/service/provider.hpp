// Provider agent: uploads its token index to a coordinator, answers relayed
// blind evaluations with its key, and logs the hashes behind matched tokens.
#pragma once

#include "phg/psi/token_index.hpp"
#include "phg/service/net.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

namespace phg::service {

struct ProviderOptions {
    Endpoint coordinator;
    std::string provider_id;
    const psi::GroupOps* group = nullptr;
    psi::OprfKey key;
    std::shared_ptr<const psi::TokenIndex> index;
    psi::ReverseMap reverse;
    /// Append-only, one `hash_text<TAB>timestamp` line per matched hash.
    std::filesystem::path match_log;
    std::chrono::milliseconds reconnect_delay{500};
    TranscriptSink transcript;
};

class ProviderAgent {
public:
    /// Throws std::invalid_argument when the index was built with another key
    /// or the id is not a valid provider id.
    explicit ProviderAgent(ProviderOptions options);

    /// Connects, uploads, serves; reconnects (with a full re-upload) after any
    /// failure until stop() is called.
    void run();
    void stop();

    /// Number of completed uploads acknowledged by a coordinator.
    std::size_t uploads() const { return uploads_; }
    /// Number of matched hashes written to the log.
    std::size_t logged() const { return logged_; }

private:
    void serve_once();

    ProviderOptions options_;
    std::atomic<bool> stopping_{false};
    std::atomic<std::size_t> uploads_{0};
    std::atomic<std::size_t> logged_{0};
    std::mutex channel_mutex_;
    std::shared_ptr<LineChannel> channel_;
};

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string iso8601_now();

}  // namespace phg::service
