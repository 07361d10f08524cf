// Client role: reports a set of perceptual hashes without revealing them.
// Only blinded group elements and OPRF tokens leave this process.
#pragma once

#include "phg/psi/oprf.hpp"
#include "phg/service/net.hpp"

#include <stdexcept>
#include <vector>

namespace phg::service {

inline constexpr std::size_t kMaxClientSet = 10000;

class ConnectionFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ProtocolError : public std::runtime_error {
public:
    ProtocolError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

struct ReportReceipt {
    std::size_t providers_contacted = 0;
    std::size_t tokens_sent = 0;

    friend bool operator==(const ReportReceipt&, const ReportReceipt&) = default;
};

/// Runs one client session. Throws std::invalid_argument for an empty,
/// mixed-algorithm or oversized X.
ReportReceipt client_report(const Endpoint& coordinator, const psi::GroupOps& group,
                            const std::vector<phash::PerceptualHash>& x,
                            TranscriptSink transcript = {});

}  // namespace phg::service
