#include "riskdpg/replay.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "riskdpg/errors.hpp"
#include "riskdpg/gradnet.hpp"

namespace riskdpg {

ReplayPool::ReplayPool(std::size_t capacity, Eigen::Index state_dim, Eigen::Index action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity == 0) throw DomainError("replay capacity must be positive");
  if (state_dim < 1 || action_dim < 1) throw DimensionError("replay dimensions must be >= 1");
}

void ReplayPool::push(Transition t) {
  if (t.x.size() != state_dim_ || t.x_next.size() != state_dim_ || t.a.size() != action_dim_)
    throw DimensionError("transition dimensions do not match the pool");
  if (!std::isfinite(t.r)) throw DomainError("non-finite reward");
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
    ++count_;
    return;
  }
  ring_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayPool::at(std::size_t i) const {
  if (i >= count_) throw DomainError("replay index out of range");
  return ring_[(head_ + i) % ring_.size()];
}

std::vector<std::size_t> ReplayPool::sample_indices(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0) throw DomainError("batch size must be positive");
  if (count_ < batch_size)
    throw InsufficientDataError("replay holds " + std::to_string(count_) + " transitions, need " +
                                std::to_string(batch_size));
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_index(count_));
  return idx;
}

std::vector<Transition> ReplayPool::sample_batch(std::size_t batch_size, Rng& rng) const {
  const auto idx = sample_indices(batch_size, rng);
  std::vector<Transition> out;
  out.reserve(batch_size);
  for (auto i : idx) out.push_back(at(i));
  return out;
}

namespace {

constexpr char kReplayTag[] = "REPLAY";

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ParseError("truncated replay dump");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64(out, bits);
}

double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void ReplayPool::save(std::ostream& out) const {
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  out.write(kReplayTag, sizeof kReplayTag - 1);
  write_u64(out, capacity_);
  write_u64(out, static_cast<std::uint64_t>(state_dim_));
  write_u64(out, static_cast<std::uint64_t>(action_dim_));
  write_u64(out, count_);
  for (std::size_t i = 0; i < count_; ++i) {
    const Transition& t = at(i);
    for (Eigen::Index k = 0; k < state_dim_; ++k) write_f64(out, t.x[k]);
    for (Eigen::Index k = 0; k < action_dim_; ++k) write_f64(out, t.a[k]);
    write_f64(out, t.r);
    for (Eigen::Index k = 0; k < state_dim_; ++k) write_f64(out, t.x_next[k]);
    out.put(t.terminal ? 1 : 0);
  }
}

ReplayPool ReplayPool::load(std::istream& in) {
  std::string head(kCheckpointMagic.size() + sizeof kReplayTag - 1, '\0');
  if (!in.read(head.data(), static_cast<std::streamsize>(head.size())) ||
      head != std::string(kCheckpointMagic) + kReplayTag)
    throw ParseError("missing replay dump header");
  const auto capacity = read_u64(in);
  const auto sd = static_cast<Eigen::Index>(read_u64(in));
  const auto ad = static_cast<Eigen::Index>(read_u64(in));
  const auto count = read_u64(in);
  if (count > capacity) throw ParseError("replay dump count exceeds capacity");
  ReplayPool pool(capacity, sd, ad);
  for (std::uint64_t i = 0; i < count; ++i) {
    Transition t;
    t.x.resize(sd);
    t.a.resize(ad);
    t.x_next.resize(sd);
    for (Eigen::Index k = 0; k < sd; ++k) t.x[k] = read_f64(in);
    for (Eigen::Index k = 0; k < ad; ++k) t.a[k] = read_f64(in);
    t.r = read_f64(in);
    for (Eigen::Index k = 0; k < sd; ++k) t.x_next[k] = read_f64(in);
    const int flag = in.get();
    if (flag == std::char_traits<char>::eof()) throw ParseError("truncated replay dump");
    t.terminal = flag != 0;
    pool.push(std::move(t));
  }
  return pool;
}

void ReplayPool::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save(out);
  if (!out) throw IoError("write failed: " + path.string());
}

ReplayPool ReplayPool::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load(in);
}

}  // namespace riskdpg
