#pragma once

#include <Eigen/Dense>
#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dfl/fairfilter.hpp"

namespace dfl::proto {

// Wire format: length-prefixed binary frames over any reliable ordered byte
// stream.
//
//   bytes 0..3   magic "DFL1"
//   byte  4      message kind
//   bytes 5..20  session id (16 bytes)
//   bytes 21..24 payload length (u32 LE, at most 16 MiB)
//   then the payload
//
// Payloads (all integers LE, floats IEEE-754 binary64 LE):
//   HELLO        u16 version, u32 trial_id, u32 n, u16 reserved — 12 bytes.
//                Sent DC→TP to open a session; TP echoes it as the ack.
//   PREDICTIONS  u8 policy (1 hard / 2 soft), u8 flags (bit0 = last chunk),
//                u32 m, u32 n, f64 param (rho or sigma2), u32 row_start,
//                u32 row_count, then row_count*n doubles (row-major chunk
//                of the m×n prediction matrix).
//   FAIR_INDICES u32 k, then k sorted unique u32 indices < m.
//   ERROR        UTF-8 reason text.
//   BYE          empty.
//
// The only TP→DC payloads are the HELLO ack, FAIR_INDICES, and ERROR text:
// the sensitive vector never has a wire representation.

inline constexpr uint32_t kMaxPayload = 16u * 1024u * 1024u;
inline constexpr uint16_t kProtocolVersion = 1;
inline constexpr size_t kFrameHeaderSize = 25;

enum class MsgKind : uint8_t {
  hello = 1,
  predictions = 2,
  fair_indices = 3,
  error = 4,
  bye = 5,
};

using SessionId = std::array<uint8_t, 16>;

struct Frame {
  MsgKind kind = MsgKind::bye;
  SessionId session{};
  std::vector<uint8_t> payload;
};

/// Blocking byte stream; both TCP sockets and the in-memory test channel
/// implement it, so the framing code has a single path.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void write_all(const uint8_t* data, size_t len) = 0;
  virtual void read_exact(uint8_t* data, size_t len) = 0;
};

/// In-memory channel: reads consume `input`, writes append to `output`.
class BufferChannel : public Channel {
 public:
  std::vector<uint8_t> input;
  std::vector<uint8_t> output;

  void write_all(const uint8_t* data, size_t len) override;
  void read_exact(uint8_t* data, size_t len) override;

 private:
  size_t pos_ = 0;
};

class TcpConnection : public Channel {
 public:
  explicit TcpConnection(int fd);
  TcpConnection(TcpConnection&& other) noexcept;
  TcpConnection& operator=(TcpConnection&& other) noexcept;
  TcpConnection(const TcpConnection&) = delete;
  TcpConnection& operator=(const TcpConnection&) = delete;
  ~TcpConnection();

  static TcpConnection connect_to(const std::string& host, uint16_t port,
                                  double timeout_sec);
  void set_timeout(double seconds);
  void write_all(const uint8_t* data, size_t len) override;
  void read_exact(uint8_t* data, size_t len) override;
  void close();

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  TcpListener(const std::string& host, uint16_t port);  // port 0 = ephemeral
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  uint16_t port() const { return port_; }
  /// nullopt on timeout.
  std::optional<TcpConnection> accept(int timeout_ms);

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

enum class Direction : uint8_t { dc_to_tp = 0, tp_to_dc = 1 };

/// Ordered record of every frame that crossed the channel.
struct Transcript {
  struct Entry {
    Direction dir;
    double timestamp;  // seconds since epoch; excluded from determinism
    std::vector<uint8_t> bytes;  // the full frame
  };
  std::vector<Entry> entries;

  /// Writes `<base>.bin` (raw frame stream) and `<base>.idx` (one line per
  /// frame: direction, byte offset, length, timestamp).
  void save(const std::string& base) const;
  static Transcript load(const std::string& base);
};

std::vector<uint8_t> encode_frame(const Frame& frame);
/// Reads one frame; throws ProtocolError on bad magic, unknown kind, or an
/// oversized payload. Records into the transcript when given.
Frame read_frame(Channel& ch, Transcript* transcript, Direction dir);
void write_frame(Channel& ch, const Frame& frame, Transcript* transcript,
                 Direction dir);

struct HelloPayload {
  uint16_t version = kProtocolVersion;
  uint32_t trial_id = 0;
  uint32_t n = 0;
};

std::vector<uint8_t> encode_hello(const HelloPayload& h);
HelloPayload decode_hello(const std::vector<uint8_t>& payload);

struct PredictionsChunkHeader {
  FilterPolicy policy = FilterPolicy::hard;
  bool last = false;
  uint32_t m = 0;
  uint32_t n = 0;
  double param = 0.0;
  uint32_t row_start = 0;
  uint32_t row_count = 0;
};

/// Rows per chunk so a chunk stays under the frame limit.
uint32_t rows_per_chunk(uint32_t n);
std::vector<uint8_t> encode_predictions_chunk(
    const PredictionsChunkHeader& h, const Eigen::MatrixXd& rows);
PredictionsChunkHeader decode_predictions_header(
    const std::vector<uint8_t>& payload);

std::vector<uint8_t> encode_fair_indices(
    const std::vector<Eigen::Index>& indices);
std::vector<Eigen::Index> decode_fair_indices(
    const std::vector<uint8_t>& payload);

/// Seed for the soft policy of one session; both TP modes derive it the
/// same way so results agree bit for bit.
uint64_t soft_session_seed(uint64_t tp_seed, uint32_t trial_id);

/// The reference prediction vector the soft policy measures distances to:
/// the batch-mean prediction row made exactly fair. Shared by the server
/// and the in-process path.
Eigen::VectorXd soft_reference(const PredictionMatrix& preds,
                               const Eigen::VectorXd& s);

/// Apply a policy the way the third party does (shared by tp_serve and the
/// in-process mode so the two are equivalent by construction).
FairIndexSet apply_policy(const PredictionMatrix& preds,
                          const Eigen::VectorXd& s, FilterPolicy policy,
                          double param, uint64_t tp_seed, uint32_t trial_id);

/// Third-party service: holds s, answers PREDICTIONS with FAIR_INDICES.
/// Sessions are handled strictly sequentially in arrival order.
class TpServer {
 public:
  TpServer(Eigen::VectorXd s, uint64_t seed);

  /// Directory with persisted train-index files; lets a session address the
  /// trial subset of s by the HELLO trial id.
  void set_split_dir(const std::string& dir);

  /// Binds, spawns the accept loop, returns the bound port.
  uint16_t start(const std::string& host, uint16_t port);
  void stop();
  ~TpServer();

  /// One full session over an arbitrary channel (used directly in tests).
  void serve_channel(Channel& ch, Transcript* transcript = nullptr);

  uint64_t sessions_served() const { return sessions_.load(); }

 private:
  void accept_loop();
  Eigen::VectorXd sensitive_for(uint32_t trial_id, uint32_t n) const;

  Eigen::VectorXd s_;
  uint64_t seed_;
  std::string split_dir_;
  std::unique_ptr<TcpListener> listener_;
  std::thread thread_;
  std::atomic<bool> stop_{false};
  std::atomic<uint64_t> sessions_{0};
};

struct PolicyRequest {
  FilterPolicy policy = FilterPolicy::hard;
  double param = 0.0;
};

/// One batched request: HELLO, chunked PREDICTIONS, FAIR_INDICES, BYE.
/// Retries the connection once; an ERROR reply surfaces as ProtocolError
/// with the TP's reason. address is "host:port".
FairIndexSet dc_request_fair_set(const std::string& address,
                                 const PredictionMatrix& preds,
                                 const PolicyRequest& request,
                                 uint32_t trial_id, uint64_t seed,
                                 Transcript* transcript = nullptr,
                                 double timeout_sec = 30.0);

/// Privacy audit over a recorded transcript.
///   shapes_ok:   every TP→DC payload is exactly a HELLO ack, a well-formed
///                index set, ERROR text, or BYE — nothing else rides along.
///   dc_clean:    every DC→TP payload is a HELLO, a well-formed
///                PREDICTIONS chunk, or BYE.
///   no_copies:   no payload contains the serialized bytes of s, any
///                column of X, or Y.
struct AuditReport {
  bool shapes_ok = true;
  bool dc_clean = true;
  bool no_copies = true;
  std::vector<std::string> findings;

  bool all_passed() const { return shapes_ok && dc_clean && no_copies; }
};

AuditReport audit_transcript(const Transcript& transcript,
                             const Eigen::VectorXd& s,
                             const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& y);

}  // namespace dfl::proto
