#pragma once

// Ordered point-to-point channels between neighbouring workers. Boundary b
// joins worker b (left) and worker b+1 (right); each boundary has one queue
// per direction. Sends never block, receives block until a message arrives,
// the timeout expires or the transport is aborted.

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "ptdvp/environment.hpp"
#include "ptdvp/error.hpp"
#include "ptdvp/mps.hpp"

namespace ptdvp {

enum class MessageKind : std::uint8_t { EnvTransfer = 0, SiteRequest = 1, UpdatedPair = 2, Handshake = 3 };

inline std::string message_kind_name(MessageKind k) {
  switch (k) {
    case MessageKind::EnvTransfer: return "EnvTransfer";
    case MessageKind::SiteRequest: return "SiteRequest";
    case MessageKind::UpdatedPair: return "UpdatedPair";
    case MessageKind::Handshake: return "Handshake";
  }
  return "?";
}

/// ToRight: sent by the left worker of the boundary.
enum class Direction : std::uint8_t { ToRight = 0, ToLeft = 1 };

struct PairPayload {
  SiteTensor left;
  BondWeights bond;
  SiteTensor right;
};

using MessagePayload = std::variant<std::monostate, Environment, SiteTensor, PairPayload>;

struct MessageTag {
  std::uint64_t step = 0;
  std::uint8_t half = 0;
  MessageKind kind = MessageKind::Handshake;

  bool operator==(const MessageTag&) const = default;
};

inline std::string to_string(const MessageTag& t) {
  return message_kind_name(t.kind) + "(step " + std::to_string(t.step) + ", half " + std::to_string(int(t.half)) + ")";
}

struct BoundaryMessage {
  MessageTag tag;
  MessagePayload payload;

  /// Number of floating-point scalars carried (a complex entry counts as two).
  std::size_t scalar_count() const {
    struct Visitor {
      std::size_t operator()(const std::monostate&) const { return 0; }
      std::size_t operator()(const Environment& e) const { return 2 * e.data.size(); }
      std::size_t operator()(const SiteTensor& s) const { return 2 * s.tensor().size(); }
      std::size_t operator()(const PairPayload& p) const {
        return 2 * (p.left.tensor().size() + p.right.tensor().size()) + p.bond.size();
      }
    };
    return std::visit(Visitor{}, payload);
  }
};

namespace detail {

inline bool payload_matches(MessageKind kind, const MessagePayload& p) {
  switch (kind) {
    case MessageKind::EnvTransfer: return std::holds_alternative<Environment>(p);
    case MessageKind::SiteRequest: return std::holds_alternative<SiteTensor>(p);
    case MessageKind::UpdatedPair: return std::holds_alternative<PairPayload>(p);
    case MessageKind::Handshake: return std::holds_alternative<std::monostate>(p);
  }
  return false;
}

}  // namespace detail

/// Per boundary, per half step counts of every message kind in each direction.
class MessageLedger {
 public:
  void record(std::size_t boundary, Direction dir, const MessageTag& tag, std::size_t scalars) {
    std::lock_guard lock(mu_);
    ++counts_[{tag.step, tag.half, boundary, static_cast<int>(tag.kind), static_cast<int>(dir)}];
    ++total_messages_;
    total_scalars_ += scalars;
  }

  std::size_t count(std::uint64_t step, int half, std::size_t boundary, MessageKind kind, Direction dir) const {
    std::lock_guard lock(mu_);
    auto it = counts_.find({step, half, boundary, static_cast<int>(kind), static_cast<int>(dir)});
    return it == counts_.end() ? 0 : it->second;
  }

  /// One EnvTransfer each way, one SiteRequest (right to left) and one
  /// UpdatedPair (left to right) per boundary and half step, nothing else.
  void verify_step(std::uint64_t step, std::size_t n_boundaries) const {
    std::lock_guard lock(mu_);
    for (int half = 0; half < 2; ++half) {
      for (std::size_t b = 0; b < n_boundaries; ++b) {
        for (int kind = 0; kind < 4; ++kind) {
          for (int dir = 0; dir < 2; ++dir) {
            const auto k = static_cast<MessageKind>(kind);
            const auto d = static_cast<Direction>(dir);
            std::size_t expected = 0;
            if (k == MessageKind::EnvTransfer) expected = 1;
            if (k == MessageKind::SiteRequest && d == Direction::ToLeft) expected = 1;
            if (k == MessageKind::UpdatedPair && d == Direction::ToRight) expected = 1;
            auto it = counts_.find({step, half, b, kind, dir});
            const std::size_t got = it == counts_.end() ? 0 : it->second;
            if (got != expected) {
              throw TransportError("message ledger: step " + std::to_string(step) + " half " + std::to_string(half) +
                                   " boundary " + std::to_string(b) + " " + message_kind_name(k) +
                                   (d == Direction::ToRight ? " ->" : " <-") + " count " + std::to_string(got) +
                                   ", expected " + std::to_string(expected));
            }
          }
        }
      }
    }
  }

  std::size_t total_messages() const {
    std::lock_guard lock(mu_);
    return total_messages_;
  }
  std::size_t total_scalars() const {
    std::lock_guard lock(mu_);
    return total_scalars_;
  }
  void clear() {
    std::lock_guard lock(mu_);
    counts_.clear();
    total_messages_ = 0;
    total_scalars_ = 0;
  }

 private:
  using Key = std::tuple<std::uint64_t, int, std::size_t, int, int>;
  mutable std::mutex mu_;
  std::map<Key, std::size_t> counts_;
  std::size_t total_messages_ = 0;
  std::size_t total_scalars_ = 0;
};

/// Neighbor-channel interface the parallel engine is written against.
class Transport {
 public:
  virtual ~Transport() = default;

  /// Sets up 2 queues for each of `n_boundaries` boundaries, dropping anything queued.
  virtual void reset(std::size_t n_boundaries) = 0;
  virtual void send(std::size_t boundary, Direction dir, BoundaryMessage msg) = 0;
  /// Blocks for the next message on (boundary, dir) and checks its tag.
  virtual BoundaryMessage receive(std::size_t boundary, Direction dir, const MessageTag& expected) = 0;
  /// Wakes every blocked receiver with a TransportError.
  virtual void abort() = 0;
  virtual std::string name() const = 0;

  MessageLedger& ledger() { return ledger_; }
  const MessageLedger& ledger() const { return ledger_; }

  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }
  std::chrono::milliseconds timeout() const { return timeout_; }

 protected:
  MessageLedger ledger_;
  std::chrono::milliseconds timeout_{std::chrono::hours(1)};
};

namespace detail {

template <class T>
class Channel {
 public:
  void push(T v) {
    {
      std::lock_guard lock(mu_);
      q_.push_back(std::move(v));
    }
    cv_.notify_one();
  }

  T pop(std::chrono::milliseconds timeout, const bool& aborted, std::mutex& abort_mu) {
    std::unique_lock lock(mu_);
    auto ready = [&] {
      std::lock_guard a(abort_mu);
      return !q_.empty() || aborted;
    };
    if (!cv_.wait_for(lock, timeout, ready)) throw TransportError("transport: receive timed out");
    {
      std::lock_guard a(abort_mu);
      if (aborted && q_.empty()) throw TransportError("transport: aborted");
    }
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }

  void wake() {
    std::lock_guard lock(mu_);
    cv_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return q_.size();
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> q_;
};

inline void check_tag(const MessageTag& got, const MessageTag& expected, std::size_t boundary) {
  if (!(got == expected)) {
    throw TransportError("transport: boundary " + std::to_string(boundary) + " expected " + to_string(expected) +
                         ", received " + to_string(got));
  }
}

/// Queue storage plus abort handling shared by the concrete transports.
template <class Item>
class ChannelTransport : public Transport {
 public:
  void reset(std::size_t n_boundaries) override {
    std::lock_guard a(abort_mu_);
    channels_.clear();
    channels_.resize(n_boundaries);
    for (auto& c : channels_) {
      c[0] = std::make_unique<Channel<Item>>();
      c[1] = std::make_unique<Channel<Item>>();
    }
    aborted_ = false;
  }

  void abort() override {
    {
      std::lock_guard a(abort_mu_);
      aborted_ = true;
    }
    for (auto& c : channels_)
      for (auto& ch : c) ch->wake();
  }

  /// Messages sent but not yet received, over all queues.
  std::size_t pending() const {
    std::size_t n = 0;
    for (const auto& c : channels_)
      for (const auto& ch : c) n += ch->size();
    return n;
  }

 protected:
  Channel<Item>& channel(std::size_t boundary, Direction dir) {
    if (boundary >= channels_.size()) throw TransportError("transport: no boundary " + std::to_string(boundary));
    return *channels_[boundary][static_cast<int>(dir)];
  }
  Item pop(std::size_t boundary, Direction dir) { return channel(boundary, dir).pop(timeout_, aborted_, abort_mu_); }

 private:
  std::vector<std::array<std::unique_ptr<Channel<Item>>, 2>> channels_;
  std::mutex abort_mu_;
  bool aborted_ = false;
};

}  // namespace detail

/// Moves message objects between threads of one process.
class InProcessTransport final : public detail::ChannelTransport<BoundaryMessage> {
 public:
  void send(std::size_t boundary, Direction dir, BoundaryMessage msg) override {
    if (!detail::payload_matches(msg.tag.kind, msg.payload)) throw TransportError("transport: payload does not match kind");
    ledger_.record(boundary, dir, msg.tag, msg.scalar_count());
    channel(boundary, dir).push(std::move(msg));
  }

  BoundaryMessage receive(std::size_t boundary, Direction dir, const MessageTag& expected) override {
    BoundaryMessage m = pop(boundary, dir);
    detail::check_tag(m.tag, expected, boundary);
    return m;
  }

  std::string name() const override { return "inprocess"; }
};

namespace detail {

class ByteWriter {
 public:
  template <class T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::byte*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_tensor(const Tensor& t) {
    put<std::uint64_t>(t.rank());
    for (auto d : t.dims()) put<std::uint64_t>(d);
    for (Eigen::Index i = 0; i < t.data().size(); ++i) {
      put(t.data()[i].real());
      put(t.data()[i].imag());
    }
  }
  void put_bond(const BondWeights& b) {
    put<std::uint64_t>(b.size());
    for (double l : b.lambda) put(l);
  }
  std::vector<std::byte> take() { return std::move(buf_); }

 private:
  std::vector<std::byte> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::byte>& b) : buf_(b) {}

  template <class T>
  T get() {
    if (pos_ + sizeof(T) > buf_.size()) throw TransportError("transport: truncated message");
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  Tensor get_tensor() {
    const auto rank = get<std::uint64_t>();
    if (rank > 8) throw TransportError("transport: corrupt tensor rank");
    Dims dims(rank);
    for (auto& d : dims) d = get<std::uint64_t>();
    const std::size_t n = product(dims);
    if (n * 16 > buf_.size() - pos_) throw TransportError("transport: truncated tensor");
    Eigen::VectorXcd data(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double re = get<double>();
      const double im = get<double>();
      data[static_cast<Eigen::Index>(i)] = cplx(re, im);
    }
    return Tensor(std::move(dims), std::move(data));
  }
  BondWeights get_bond() {
    const auto n = get<std::uint64_t>();
    if (n * 8 > buf_.size() - pos_) throw TransportError("transport: truncated bond");
    std::vector<double> l(n);
    for (auto& x : l) x = get<double>();
    return BondWeights::from_lambda(std::move(l));
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::vector<std::byte>& buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::byte> encode_message(const BoundaryMessage& m) {
  detail::ByteWriter w;
  w.put<std::uint64_t>(m.tag.step);
  w.put<std::uint8_t>(m.tag.half);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.tag.kind));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.payload.index()));
  if (const auto* e = std::get_if<Environment>(&m.payload)) {
    w.put<std::uint8_t>(e->side == EnvSide::Left ? 0 : 1);
    w.put<std::uint64_t>(e->site);
    w.put_tensor(e->data);
  } else if (const auto* s = std::get_if<SiteTensor>(&m.payload)) {
    w.put_tensor(s->tensor());
  } else if (const auto* p = std::get_if<PairPayload>(&m.payload)) {
    w.put_tensor(p->left.tensor());
    w.put_bond(p->bond);
    w.put_tensor(p->right.tensor());
  }
  return w.take();
}

inline BoundaryMessage decode_message(const std::vector<std::byte>& bytes) {
  detail::ByteReader r(bytes);
  BoundaryMessage m;
  m.tag.step = r.get<std::uint64_t>();
  m.tag.half = r.get<std::uint8_t>();
  const auto kind = r.get<std::uint8_t>();
  if (kind > 3) throw TransportError("transport: corrupt message kind");
  m.tag.kind = static_cast<MessageKind>(kind);
  switch (r.get<std::uint8_t>()) {
    case 0: break;
    case 1: {
      Environment e;
      e.side = r.get<std::uint8_t>() == 0 ? EnvSide::Left : EnvSide::Right;
      e.site = r.get<std::uint64_t>();
      e.data = r.get_tensor();
      m.payload = std::move(e);
      break;
    }
    case 2: m.payload = SiteTensor(r.get_tensor()); break;
    case 3: {
      PairPayload p;
      p.left = SiteTensor(r.get_tensor());
      p.bond = r.get_bond();
      p.right = SiteTensor(r.get_tensor());
      m.payload = std::move(p);
      break;
    }
    default: throw TransportError("transport: corrupt payload tag");
  }
  if (!r.done()) throw TransportError("transport: trailing bytes in message");
  return m;
}

/// Byte-encodes every message on send and decodes on receive, as an
/// inter-process binding would.
class SerializingTransport final : public detail::ChannelTransport<std::vector<std::byte>> {
 public:
  void send(std::size_t boundary, Direction dir, BoundaryMessage msg) override {
    if (!detail::payload_matches(msg.tag.kind, msg.payload)) throw TransportError("transport: payload does not match kind");
    ledger_.record(boundary, dir, msg.tag, msg.scalar_count());
    std::vector<std::byte> bytes = encode_message(msg);
    {
      std::lock_guard lock(bytes_mu_);
      bytes_sent_ += bytes.size();
    }
    channel(boundary, dir).push(std::move(bytes));
  }

  BoundaryMessage receive(std::size_t boundary, Direction dir, const MessageTag& expected) override {
    BoundaryMessage m = decode_message(pop(boundary, dir));
    detail::check_tag(m.tag, expected, boundary);
    return m;
  }

  std::string name() const override { return "serializing"; }

  std::size_t bytes_sent() const {
    std::lock_guard lock(bytes_mu_);
    return bytes_sent_;
  }

 private:
  mutable std::mutex bytes_mu_;
  std::size_t bytes_sent_ = 0;
};

inline std::unique_ptr<Transport> make_transport(const std::string& name) {
  if (name == "inprocess") return std::make_unique<InProcessTransport>();
  if (name == "serializing") return std::make_unique<SerializingTransport>();
  throw ConfigError("unknown transport '" + name + "'");
}

}  // namespace ptdvp
