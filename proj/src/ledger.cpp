#include "afl/ledger.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <numeric>
#include <random>

#include <openssl/evp.h>
#include <json.hpp>

namespace afl::ledger {

namespace {

void put_u64(std::uint8_t* out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out[b] = static_cast<std::uint8_t>(v >> (8 * b));
}

std::uint64_t get_u64(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= std::uint64_t{in[b]} << (8 * b);
  return v;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(const std::uint8_t* in) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= std::uint32_t{in[b]} << (8 * b);
  return v;
}

constexpr Digest kGenesis{};

}  // namespace

Digest sha256(std::span<const std::uint8_t> bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  Digest out{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != out.size()) {
    throw std::runtime_error("sha256: digest computation failed");
  }
  return out;
}

std::string to_hex(const Digest& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : digest) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xf]);
  }
  return s;
}

std::array<std::uint8_t, kCanonicalSize> canonical_bytes(const ReputationRecord& record) {
  std::array<std::uint8_t, kCanonicalSize> out{};
  put_u64(out.data(), record.round);
  put_u64(out.data() + 8, record.client_id);
  put_u64(out.data() + 16, std::bit_cast<std::uint64_t>(record.zeta));
  put_u64(out.data() + 24, std::bit_cast<std::uint64_t>(record.epsilon));
  std::copy(record.prev_hash.begin(), record.prev_hash.end(), out.begin() + 32);
  return out;
}

Digest compute_record_hash(const ReputationRecord& record) {
  const auto bytes = canonical_bytes(record);
  return sha256(bytes);
}

void TamperConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("invariant violated: 0 <= alpha <= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("invariant violated: beta > 0");
}

// ---- ReputationStore --------------------------------------------------------

std::vector<ClientId> ReputationStore::clients() const {
  std::vector<ClientId> out;
  out.reserve(by_client_.size());
  for (const auto& [id, _] : by_client_) out.push_back(id);
  return out;
}

std::optional<std::size_t> ReputationStore::latest_index(ClientId client_id) const {
  auto it = by_client_.find(client_id);
  if (it == by_client_.end() || it->second.empty()) return std::nullopt;
  return it->second.back();
}

void ReputationStore::check_order(std::uint64_t round) const {
  if (!records_.empty() && round < records_.back().round) {
    throw OrderingError("append: round " + std::to_string(round) + " is before the latest round " +
                        std::to_string(records_.back().round));
  }
}

const ReputationRecord& ReputationStore::push(ReputationRecord record) {
  by_client_[record.client_id].push_back(records_.size());
  records_.push_back(record);
  return records_.back();
}

std::span<const std::size_t> ReputationStore::indices_of(ClientId client_id) const {
  auto it = by_client_.find(client_id);
  if (it == by_client_.end()) throw std::out_of_range("unknown client " + std::to_string(client_id));
  return it->second;
}

// ---- HashChainLedger --------------------------------------------------------

const ReputationRecord& HashChainLedger::append(std::uint64_t round, ClientId client_id, double zeta,
                                                double epsilon) {
  check_order(round);
  ReputationRecord rec{round, client_id, zeta, epsilon, records_.empty() ? kGenesis : records_.back().record_hash, {}};
  rec.record_hash = compute_record_hash(rec);
  return push(rec);
}

bool HashChainLedger::record_ok(std::size_t index) const {
  const ReputationRecord& rec = records_[index];
  const Digest& expected_prev = index == 0 ? kGenesis : records_[index - 1].record_hash;
  return rec.prev_hash == expected_prev && compute_record_hash(rec) == rec.record_hash;
}

std::optional<std::size_t> HashChainLedger::verify_chain() const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!record_ok(i)) return i;
  }
  return std::nullopt;
}

Reading HashChainLedger::read_reputation(ClientId client_id) const {
  const auto idx = indices_of(client_id);
  const bool trusted = std::all_of(idx.begin(), idx.end(), [this](std::size_t i) { return record_ok(i); });
  return {records_[idx.back()].epsilon, trusted};
}

std::optional<double> HashChainLedger::last_verified(ClientId client_id) const {
  std::optional<double> out;
  for (std::size_t i : indices_of(client_id)) {
    if (!record_ok(i)) break;
    out = records_[i].epsilon;
  }
  return out;
}

std::vector<std::uint8_t> HashChainLedger::to_bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(records_.size() * (4 + kStoredRecordSize));
  for (const ReputationRecord& rec : records_) {
    put_u32(out, static_cast<std::uint32_t>(kStoredRecordSize));
    const auto canon = canonical_bytes(rec);
    out.insert(out.end(), canon.begin(), canon.end());
    out.insert(out.end(), rec.record_hash.begin(), rec.record_hash.end());
  }
  return out;
}

HashChainLedger HashChainLedger::from_bytes(std::span<const std::uint8_t> bytes) {
  HashChainLedger ledger;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 4) throw FormatError("truncated length prefix at byte " + std::to_string(pos));
    const std::uint32_t len = get_u32(bytes.data() + pos);
    if (len != kStoredRecordSize) {
      throw FormatError("record " + std::to_string(ledger.size()) + " has length " + std::to_string(len) +
                        ", expected " + std::to_string(kStoredRecordSize));
    }
    pos += 4;
    if (bytes.size() - pos < len) throw FormatError("truncated record " + std::to_string(ledger.size()));
    const std::uint8_t* p = bytes.data() + pos;
    ReputationRecord rec;
    rec.round = get_u64(p);
    rec.client_id = get_u64(p + 8);
    rec.zeta = std::bit_cast<double>(get_u64(p + 16));
    rec.epsilon = std::bit_cast<double>(get_u64(p + 24));
    std::memcpy(rec.prev_hash.data(), p + 32, 32);
    std::memcpy(rec.record_hash.data(), p + 64, 32);
    ledger.push(rec);
    pos += len;
  }
  return ledger;
}

void HashChainLedger::save(const std::filesystem::path& path) const {
  const auto bytes = to_bytes();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

HashChainLedger HashChainLedger::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

std::string HashChainLedger::to_jsonl() const {
  std::string out;
  for (const ReputationRecord& rec : records_) {
    nlohmann::ordered_json j;
    j["round"] = rec.round;
    j["client_id"] = rec.client_id;
    j["zeta"] = rec.zeta;
    j["epsilon"] = rec.epsilon;
    j["prev_hash"] = to_hex(rec.prev_hash);
    j["record_hash"] = to_hex(rec.record_hash);
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---- PlainStore ---------------------------------------------------------------

const ReputationRecord& PlainStore::append(std::uint64_t round, ClientId client_id, double zeta,
                                           double epsilon) {
  check_order(round);
  return push({round, client_id, zeta, epsilon, {}, {}});
}

Reading PlainStore::read_reputation(ClientId client_id) const {
  return {records_[indices_of(client_id).back()].epsilon, true};
}

// ---- tampering ----------------------------------------------------------------

std::vector<Mutation> tamper_attack(ReputationStore& store, const TamperConfig& cfg) {
  cfg.validate();
  std::vector<ClientId> ids = store.clients();
  // The small slack keeps products such as 0.1 * 30 from rounding up a client.
  const auto n_attacked = static_cast<std::size_t>(
      std::ceil(cfg.alpha * static_cast<double>(ids.size()) - 1e-9));

  std::mt19937_64 rng(cfg.seed);
  // Partial Fisher-Yates over the sorted id list.
  for (std::size_t j = 0; j < n_attacked && j + 1 < ids.size(); ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, ids.size() - 1);
    std::swap(ids[j], ids[pick(rng)]);
  }
  ids.resize(std::min(n_attacked, ids.size()));

  std::vector<Mutation> log;
  for (ClientId id : ids) {
    const std::size_t idx = *store.latest_index(id);
    ReputationRecord& rec = store.raw_record(idx);
    const double before = rec.epsilon;
    rec.epsilon = before * cfg.beta;
    log.push_back({idx, id, before, rec.epsilon});
  }
  std::sort(log.begin(), log.end(), [](const Mutation& a, const Mutation& b) { return a.record_index < b.record_index; });
  return log;
}

}  // namespace afl::ledger
