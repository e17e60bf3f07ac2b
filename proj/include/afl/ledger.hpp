#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Append-only storage for reputation records. HashChainLedger links every
// record to its predecessor by SHA-256 so that editing any stored field is
// detectable; PlainStore keeps the same records without any protection and
// exists as the comparison point for tampering experiments.
namespace afl::ledger {

using ClientId = std::uint64_t;
using Digest = std::array<std::uint8_t, 32>;

inline constexpr std::size_t kCanonicalSize = 64;          // round, client, zeta, epsilon, prev_hash
inline constexpr std::size_t kStoredRecordSize = kCanonicalSize + 32;

Digest sha256(std::span<const std::uint8_t> bytes);
std::string to_hex(const Digest& digest);

struct ReputationRecord {
  std::uint64_t round = 0;
  ClientId client_id = 0;
  double zeta = 0.0;
  double epsilon = 0.0;
  Digest prev_hash{};
  Digest record_hash{};
};

/// Little-endian: round u64, client_id u64, zeta f64, epsilon f64, prev_hash.
std::array<std::uint8_t, kCanonicalSize> canonical_bytes(const ReputationRecord& record);
Digest compute_record_hash(const ReputationRecord& record);

class OrderingError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Reading {
  double epsilon = 0.0;
  bool trusted = true;
};

struct Mutation {
  std::size_t record_index = 0;
  ClientId client_id = 0;
  double before = 0.0;
  double after = 0.0;
};

struct TamperConfig {
  double alpha = 0.0;  // fraction of clients attacked
  double beta = 1.0;   // multiplicative inflation of the stored epsilon
  std::uint64_t seed = 0;

  void validate() const;
};

class ReputationStore {
public:
  virtual ~ReputationStore() = default;

  /// Throws OrderingError if `round` is below the latest stored round.
  virtual const ReputationRecord& append(std::uint64_t round, ClientId client_id, double zeta,
                                         double epsilon) = 0;

  /// Latest stored epsilon for the client and whether it can be trusted.
  /// Throws std::out_of_range for an unknown client.
  virtual Reading read_reputation(ClientId client_id) const = 0;

  std::span<const ReputationRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  bool contains(ClientId client_id) const { return by_client_.contains(client_id); }
  std::vector<ClientId> clients() const;
  std::optional<std::size_t> latest_index(ClientId client_id) const;

  /// Direct write access that bypasses hashing. Used by the tamper simulator
  /// and by tests that model an attacker with raw storage access.
  ReputationRecord& raw_record(std::size_t index) { return records_.at(index); }

protected:
  void check_order(std::uint64_t round) const;
  const ReputationRecord& push(ReputationRecord record);
  std::span<const std::size_t> indices_of(ClientId client_id) const;

  std::vector<ReputationRecord> records_;
  std::map<ClientId, std::vector<std::size_t>> by_client_;
};

class HashChainLedger final : public ReputationStore {
public:
  const ReputationRecord& append(std::uint64_t round, ClientId client_id, double zeta,
                                 double epsilon) override;

  /// Trusted only if every record of this client re-hashes to its stored
  /// digest and links to the stored digest of its predecessor.
  Reading read_reputation(ClientId client_id) const override;

  /// Epsilon of the client's newest record that precedes its first bad record,
  /// if there is one.
  std::optional<double> last_verified(ClientId client_id) const;

  /// Index of the first record whose digest or back-link does not match;
  /// nullopt when the whole chain verifies.
  std::optional<std::size_t> verify_chain() const;

  /// Length-prefixed binary: per record a u32 LE length (96) then the 64
  /// canonical bytes followed by the 32-byte record hash.
  void save(const std::filesystem::path& path) const;
  static HashChainLedger load(const std::filesystem::path& path);
  static HashChainLedger from_bytes(std::span<const std::uint8_t> bytes);
  std::vector<std::uint8_t> to_bytes() const;

  /// One JSON object per line, digests hex-encoded.
  std::string to_jsonl() const;

private:
  bool record_ok(std::size_t index) const;
};

class PlainStore final : public ReputationStore {
public:
  const ReputationRecord& append(std::uint64_t round, ClientId client_id, double zeta,
                                 double epsilon) override;
  /// Always trusted: the store has no way to notice edits.
  Reading read_reputation(ClientId client_id) const override;
};

/// Picks ceil(alpha * n_clients) distinct clients (deterministic in seed) and
/// multiplies the epsilon of each one's latest record by beta in place,
/// leaving stored digests untouched. Returns the altered records in
/// ascending record order.
std::vector<Mutation> tamper_attack(ReputationStore& store, const TamperConfig& cfg);

}  // namespace afl::ledger
