#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "pttag/scorer.hpp"

namespace pttag {

inline constexpr int kSidecarProtocolVersion = 1;

// Client side of the sidecar protocol: newline-delimited JSON. The sidecar
// sends {"protocol_version":1,"descriptor":{...}} first, then answers each
// {"id","text"} request with {"id","scores"} or {"id","error"}, in order.
//
// Addresses: "tcp:<host>:<port>" or "stdio:<command line>" (the command is
// run through /bin/sh and spoken to over its stdin/stdout).
class RemoteScorer final : public Scorer {
 public:
  // Connects and reads the handshake; throws BackendError on failure.
  explicit RemoteScorer(const std::string& address);
  ~RemoteScorer() override;

  RemoteScorer(const RemoteScorer&) = delete;
  RemoteScorer& operator=(const RemoteScorer&) = delete;

  const ScorerDescriptor& descriptor() const override { return descriptor_; }
  // Requests are pipelined; records the sidecar rejects come back with
  // ScoreVector::error set. Transport failures throw BackendError.
  std::vector<ScoreVector> score_batch(std::span<const ModelInput> inputs) const override;

 private:
  class Channel;
  std::unique_ptr<Channel> channel_;
  ScorerDescriptor descriptor_;
  mutable std::mutex mutex_;
};

}  // namespace pttag
