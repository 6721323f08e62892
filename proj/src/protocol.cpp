#include "dfl/protocol.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "dfl/bytes.hpp"
#include "dfl/dataset.hpp"
#include "dfl/errors.hpp"
#include "dfl/rng.hpp"

namespace dfl::proto {

namespace {

constexpr std::array<char, 4> kMagic = {'D', 'F', 'L', '1'};

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void set_socket_timeout(int fd, double seconds) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(seconds);
  tv.tv_usec = static_cast<suseconds_t>((seconds - double(tv.tv_sec)) * 1e6);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

[[noreturn]] void throw_errno(const std::string& what) {
  throw ProtocolError(what + ": " + std::strerror(errno));
}

}  // namespace

// ---- channels ----

void BufferChannel::write_all(const uint8_t* data, size_t len) {
  output.insert(output.end(), data, data + len);
}

void BufferChannel::read_exact(uint8_t* data, size_t len) {
  if (pos_ + len > input.size())
    throw ProtocolError("in-memory channel exhausted");
  std::memcpy(data, input.data() + pos_, len);
  pos_ += len;
}

TcpConnection::TcpConnection(int fd) : fd_(fd) {}

TcpConnection::TcpConnection(TcpConnection&& other) noexcept : fd_(other.fd_) {
  other.fd_ = -1;
}

TcpConnection& TcpConnection::operator=(TcpConnection&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

TcpConnection::~TcpConnection() { close(); }

void TcpConnection::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

TcpConnection TcpConnection::connect_to(const std::string& host, uint16_t port,
                                        double timeout_sec) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res)
    throw ProtocolError("cannot resolve " + host);
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw_errno("socket");
  }
  const int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0) {
    ::close(fd);
    throw_errno("connect to " + host + ":" + service);
  }
  TcpConnection conn(fd);
  conn.set_timeout(timeout_sec);
  return conn;
}

void TcpConnection::set_timeout(double seconds) {
  set_socket_timeout(fd_, seconds);
}

void TcpConnection::write_all(const uint8_t* data, size_t len) {
  size_t sent = 0;
  while (sent < len) {
    const ssize_t rc = ::send(fd_, data + sent, len - sent, MSG_NOSIGNAL);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    sent += static_cast<size_t>(rc);
  }
}

void TcpConnection::read_exact(uint8_t* data, size_t len) {
  size_t got = 0;
  while (got < len) {
    const ssize_t rc = ::recv(fd_, data + got, len - got, 0);
    if (rc == 0) throw ProtocolError("connection closed by peer");
    if (rc < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK)
        throw ProtocolError("read timed out");
      throw_errno("recv");
    }
    got += static_cast<size_t>(rc);
  }
}

TcpListener::TcpListener(const std::string& host, uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw_errno("socket");
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw ProtocolError("bad bind address " + host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const int err = errno;
    ::close(fd_);
    errno = err;
    throw_errno("bind " + host + ":" + std::to_string(port));
  }
  if (::listen(fd_, 16) != 0) {
    ::close(fd_);
    throw_errno("listen");
  }
  sockaddr_in bound{};
  socklen_t slen = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &slen);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<TcpConnection> TcpListener::accept(int timeout_ms) {
  pollfd pfd{fd_, POLLIN, 0};
  const int rc = ::poll(&pfd, 1, timeout_ms);
  if (rc == 0) return std::nullopt;
  if (rc < 0) {
    if (errno == EINTR) return std::nullopt;
    throw_errno("poll");
  }
  const int conn = ::accept(fd_, nullptr, nullptr);
  if (conn < 0) {
    if (errno == EINTR || errno == EAGAIN) return std::nullopt;
    throw_errno("accept");
  }
  return TcpConnection(conn);
}

// ---- framing ----

std::vector<uint8_t> encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload)
    throw ProtocolError("frame payload exceeds 16 MiB");
  std::vector<uint8_t> out(kFrameHeaderSize + frame.payload.size());
  std::memcpy(out.data(), kMagic.data(), 4);
  out[4] = static_cast<uint8_t>(frame.kind);
  std::memcpy(out.data() + 5, frame.session.data(), 16);
  bytes::store_u32(out.data() + 21,
                   static_cast<uint32_t>(frame.payload.size()));
  std::memcpy(out.data() + kFrameHeaderSize, frame.payload.data(),
              frame.payload.size());
  return out;
}

Frame read_frame(Channel& ch, Transcript* transcript, Direction dir) {
  std::array<uint8_t, kFrameHeaderSize> header{};
  ch.read_exact(header.data(), header.size());
  if (std::memcmp(header.data(), kMagic.data(), 4) != 0)
    throw ProtocolError("bad frame magic");
  const uint8_t kind = header[4];
  if (kind < 1 || kind > 5)
    throw ProtocolError("unknown message kind " + std::to_string(kind));
  const uint32_t len = bytes::load_u32(header.data() + 21);
  if (len > kMaxPayload) throw ProtocolError("frame payload exceeds 16 MiB");
  Frame frame;
  frame.kind = static_cast<MsgKind>(kind);
  std::memcpy(frame.session.data(), header.data() + 5, 16);
  frame.payload.resize(len);
  if (len > 0) ch.read_exact(frame.payload.data(), len);
  if (transcript) {
    Transcript::Entry e;
    e.dir = dir;
    e.timestamp = now_seconds();
    e.bytes.assign(header.begin(), header.end());
    e.bytes.insert(e.bytes.end(), frame.payload.begin(), frame.payload.end());
    transcript->entries.push_back(std::move(e));
  }
  return frame;
}

void write_frame(Channel& ch, const Frame& frame, Transcript* transcript,
                 Direction dir) {
  const auto bytes = encode_frame(frame);
  if (transcript)
    transcript->entries.push_back({dir, now_seconds(), bytes});
  ch.write_all(bytes.data(), bytes.size());
}

std::vector<uint8_t> encode_hello(const HelloPayload& h) {
  std::vector<uint8_t> out(12, 0);
  bytes::store_u16(out.data(), h.version);
  bytes::store_u32(out.data() + 2, h.trial_id);
  bytes::store_u32(out.data() + 6, h.n);
  return out;
}

HelloPayload decode_hello(const std::vector<uint8_t>& payload) {
  if (payload.size() != 12) throw ProtocolError("malformed HELLO payload");
  HelloPayload h;
  h.version = bytes::load_u16(payload.data());
  h.trial_id = bytes::load_u32(payload.data() + 2);
  h.n = bytes::load_u32(payload.data() + 6);
  return h;
}

uint32_t rows_per_chunk(uint32_t n) {
  if (n == 0) throw ProtocolError("prediction width is zero");
  const uint32_t rows = (kMaxPayload - 26) / (8 * n);
  if (rows == 0)
    throw ProtocolError("one prediction row does not fit in a frame");
  return rows;
}

std::vector<uint8_t> encode_predictions_chunk(const PredictionsChunkHeader& h,
                                              const Eigen::MatrixXd& rows) {
  if (rows.rows() != static_cast<Eigen::Index>(h.row_count) ||
      rows.cols() != static_cast<Eigen::Index>(h.n))
    throw ProtocolError("chunk shape mismatch");
  std::vector<uint8_t> out(26 + size_t(h.row_count) * h.n * 8);
  out[0] = static_cast<uint8_t>(h.policy);
  out[1] = h.last ? 1 : 0;
  bytes::store_u32(out.data() + 2, h.m);
  bytes::store_u32(out.data() + 6, h.n);
  bytes::store_f64(out.data() + 10, h.param);
  bytes::store_u32(out.data() + 18, h.row_start);
  bytes::store_u32(out.data() + 22, h.row_count);
  size_t off = 26;
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = 0; j < rows.cols(); ++j, off += 8)
      bytes::store_f64(out.data() + off, rows(i, j));
  return out;
}

PredictionsChunkHeader decode_predictions_header(
    const std::vector<uint8_t>& payload) {
  if (payload.size() < 26)
    throw ProtocolError("malformed PREDICTIONS payload");
  PredictionsChunkHeader h;
  const uint8_t policy = payload[0];
  if (policy != 1 && policy != 2)
    throw ProtocolError("unknown policy byte " + std::to_string(policy));
  h.policy = static_cast<FilterPolicy>(policy);
  h.last = (payload[1] & 1) != 0;
  h.m = bytes::load_u32(payload.data() + 2);
  h.n = bytes::load_u32(payload.data() + 6);
  h.param = bytes::load_f64(payload.data() + 10);
  h.row_start = bytes::load_u32(payload.data() + 18);
  h.row_count = bytes::load_u32(payload.data() + 22);
  if (!std::isfinite(h.param) || h.param < 0.0)
    throw ProtocolError("bad policy parameter");
  if (payload.size() != 26 + size_t(h.row_count) * h.n * 8)
    throw ProtocolError("PREDICTIONS payload length mismatch");
  return h;
}

std::vector<uint8_t> encode_fair_indices(
    const std::vector<Eigen::Index>& indices) {
  std::vector<uint8_t> out(4 + indices.size() * 4);
  bytes::store_u32(out.data(), static_cast<uint32_t>(indices.size()));
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || (i > 0 && indices[i] <= indices[i - 1]))
      throw ProtocolError("FAIR_INDICES not sorted unique");
    bytes::store_u32(out.data() + 4 + 4 * i,
                     static_cast<uint32_t>(indices[i]));
  }
  return out;
}

std::vector<Eigen::Index> decode_fair_indices(
    const std::vector<uint8_t>& payload) {
  if (payload.size() < 4) throw ProtocolError("malformed FAIR_INDICES");
  const uint32_t k = bytes::load_u32(payload.data());
  if (payload.size() != 4 + size_t(k) * 4)
    throw ProtocolError("FAIR_INDICES length mismatch");
  std::vector<Eigen::Index> out(k);
  for (uint32_t i = 0; i < k; ++i) {
    out[i] = static_cast<Eigen::Index>(bytes::load_u32(payload.data() + 4 + 4 * i));
    if (i > 0 && out[i] <= out[i - 1])
      throw ProtocolError("FAIR_INDICES not sorted unique");
  }
  return out;
}

// ---- shared policy application ----

uint64_t soft_session_seed(uint64_t tp_seed, uint32_t trial_id) {
  return rng::mix(tp_seed, trial_id);
}

Eigen::VectorXd soft_reference(const PredictionMatrix& preds,
                               const Eigen::VectorXd& s) {
  const Eigen::VectorXd mean_row =
      preds.values.colwise().mean().transpose();
  return reference_hypothesis(mean_row, s);
}

FairIndexSet apply_policy(const PredictionMatrix& preds,
                          const Eigen::VectorXd& s, FilterPolicy policy,
                          double param, uint64_t tp_seed, uint32_t trial_id) {
  if (policy == FilterPolicy::hard) return hard_filter(preds, s, param);
  return soft_filter(preds, soft_reference(preds, s), param,
                     soft_session_seed(tp_seed, trial_id), &s);
}

// ---- transcripts ----

void Transcript::save(const std::string& base) const {
  std::ofstream bin(base + ".bin", std::ios::binary);
  std::ofstream idx(base + ".idx", std::ios::binary);
  if (!bin || !idx) throw Error("cannot write transcript " + base);
  size_t offset = 0;
  for (const auto& e : entries) {
    bin.write(reinterpret_cast<const char*>(e.bytes.data()),
              static_cast<std::streamsize>(e.bytes.size()));
    char line[96];
    std::snprintf(line, sizeof line, "%s %zu %zu %.6f\n",
                  e.dir == Direction::dc_to_tp ? "dc->tp" : "tp->dc", offset,
                  e.bytes.size(), e.timestamp);
    idx << line;
    offset += e.bytes.size();
  }
  if (!bin || !idx) throw Error("transcript write failed: " + base);
}

Transcript Transcript::load(const std::string& base) {
  std::ifstream bin(base + ".bin", std::ios::binary);
  std::ifstream idx(base + ".idx");
  if (!bin || !idx) throw Error("cannot open transcript " + base);
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(bin)),
                           std::istreambuf_iterator<char>());
  Transcript t;
  std::string dir;
  size_t offset = 0, len = 0;
  double ts = 0.0;
  while (idx >> dir >> offset >> len >> ts) {
    if (offset + len > raw.size())
      throw ParseError("transcript index out of range", 0);
    Entry e;
    e.dir = dir == "dc->tp" ? Direction::dc_to_tp : Direction::tp_to_dc;
    e.timestamp = ts;
    e.bytes.assign(raw.begin() + static_cast<std::ptrdiff_t>(offset),
                   raw.begin() + static_cast<std::ptrdiff_t>(offset + len));
    t.entries.push_back(std::move(e));
  }
  return t;
}

// ---- third-party server ----

TpServer::TpServer(Eigen::VectorXd s, uint64_t seed)
    : s_(std::move(s)), seed_(seed) {
  for (Eigen::Index i = 0; i < s_.size(); ++i)
    if (s_[i] != 0.0 && s_[i] != 1.0)
      throw Error("tp_serve: sensitive vector must be 0/1");
}

void TpServer::set_split_dir(const std::string& dir) { split_dir_ = dir; }

uint16_t TpServer::start(const std::string& host, uint16_t port) {
  listener_ = std::make_unique<TcpListener>(host, port);
  stop_.store(false);
  thread_ = std::thread([this] { accept_loop(); });
  return listener_->port();
}

void TpServer::stop() {
  stop_.store(true);
  if (thread_.joinable()) thread_.join();
  listener_.reset();
}

TpServer::~TpServer() { stop(); }

void TpServer::accept_loop() {
  while (!stop_.load()) {
    std::optional<TcpConnection> conn;
    try {
      conn = listener_->accept(100);
    } catch (const Error&) {
      continue;
    }
    if (!conn) continue;
    conn->set_timeout(30.0);
    try {
      serve_channel(*conn);
    } catch (const Error&) {
      // One broken session never takes the service down.
    }
  }
}

Eigen::VectorXd TpServer::sensitive_for(uint32_t trial_id, uint32_t n) const {
  if (n == s_.size()) return s_;
  if (!split_dir_.empty()) {
    const std::string prefix = "trial_" + std::to_string(trial_id) + "_seed_";
    for (const auto& entry :
         std::filesystem::directory_iterator(split_dir_)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind(prefix, 0) != 0 || entry.path().extension() != ".idx")
        continue;
      const auto indices = read_split_file(entry.path().string());
      if (indices.size() != n) continue;
      Eigen::VectorXd sub(static_cast<Eigen::Index>(n));
      for (size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= s_.size())
          throw ProtocolError("length mismatch: split index out of range");
        sub[static_cast<Eigen::Index>(i)] = s_[indices[i]];
      }
      return sub;
    }
  }
  throw ProtocolError("length mismatch: request n=" + std::to_string(n) +
                      ", |s|=" + std::to_string(s_.size()));
}

void TpServer::serve_channel(Channel& ch, Transcript* transcript) {
  const auto reply_error = [&](const SessionId& sid, const std::string& why) {
    try {
      Frame err;
      err.kind = MsgKind::error;
      err.session = sid;
      err.payload.assign(why.begin(), why.end());
      write_frame(ch, err, transcript, Direction::tp_to_dc);
    } catch (const Error&) {
      // Peer already gone; nothing else to do.
    }
  };

  Frame first = read_frame(ch, transcript, Direction::dc_to_tp);
  sessions_.fetch_add(1);
  if (first.kind != MsgKind::hello) {
    reply_error(first.session, "expected HELLO");
    return;
  }
  HelloPayload hello;
  try {
    hello = decode_hello(first.payload);
  } catch (const Error& e) {
    reply_error(first.session, e.what());
    return;
  }
  if (hello.version != kProtocolVersion) {
    reply_error(first.session,
                "unsupported version " + std::to_string(hello.version));
    return;
  }
  Eigen::VectorXd svec;
  try {
    svec = sensitive_for(hello.trial_id, hello.n);
  } catch (const Error& e) {
    reply_error(first.session, e.what());
    return;
  }
  Frame ack;
  ack.kind = MsgKind::hello;
  ack.session = first.session;
  ack.payload = encode_hello(hello);
  write_frame(ch, ack, transcript, Direction::tp_to_dc);

  Eigen::MatrixXd values;
  PredictionsChunkHeader lead;
  bool started = false;
  uint32_t rows_received = 0;
  while (true) {
    Frame msg = read_frame(ch, transcript, Direction::dc_to_tp);
    if (msg.kind == MsgKind::bye) return;
    if (msg.kind != MsgKind::predictions) {
      reply_error(msg.session, "unexpected message kind");
      return;
    }
    PredictionsChunkHeader h;
    try {
      h = decode_predictions_header(msg.payload);
    } catch (const Error& e) {
      reply_error(msg.session, e.what());
      return;
    }
    if (h.n != hello.n) {
      reply_error(msg.session, "length mismatch: chunk n != HELLO n");
      return;
    }
    if (!started) {
      if (h.m == 0) {
        reply_error(msg.session, "empty hypothesis batch");
        return;
      }
      lead = h;
      values.resize(h.m, h.n);
      started = true;
    } else if (h.m != lead.m || h.policy != lead.policy ||
               h.param != lead.param) {
      reply_error(msg.session, "inconsistent continuation chunk");
      return;
    }
    if (h.row_start != rows_received ||
        uint64_t(h.row_start) + h.row_count > lead.m) {
      reply_error(msg.session, "bad chunk row range");
      return;
    }
    size_t off = 26;
    for (uint32_t i = 0; i < h.row_count; ++i)
      for (uint32_t j = 0; j < h.n; ++j, off += 8)
        values(static_cast<Eigen::Index>(h.row_start + i),
               static_cast<Eigen::Index>(j)) =
            bytes::load_f64(msg.payload.data() + off);
    rows_received += h.row_count;
    if (!h.last) continue;
    if (rows_received != lead.m) {
      reply_error(msg.session, "chunked matrix incomplete");
      return;
    }
    FairIndexSet fair;
    try {
      fair = apply_policy({values}, svec, lead.policy, lead.param, seed_,
                          hello.trial_id);
    } catch (const Error& e) {
      reply_error(msg.session, e.what());
      return;
    }
    Frame reply;
    reply.kind = MsgKind::fair_indices;
    reply.session = msg.session;
    reply.payload = encode_fair_indices(fair.indices);
    write_frame(ch, reply, transcript, Direction::tp_to_dc);
    try {
      const Frame end = read_frame(ch, transcript, Direction::dc_to_tp);
      if (end.kind != MsgKind::bye)
        reply_error(end.session, "expected BYE");
    } catch (const Error&) {
      // Closing without BYE is tolerated.
    }
    return;
  }
}

// ---- data-center client ----

namespace {

std::pair<std::string, uint16_t> parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 >= address.size())
    throw ProtocolError("address must be host:port, got " + address);
  const std::string host = address.substr(0, colon);
  const int port = std::stoi(address.substr(colon + 1));
  if (port < 1 || port > 65535)
    throw ProtocolError("bad port in address " + address);
  return {host, static_cast<uint16_t>(port)};
}

}  // namespace

FairIndexSet dc_request_fair_set(const std::string& address,
                                 const PredictionMatrix& preds,
                                 const PolicyRequest& request,
                                 uint32_t trial_id, uint64_t seed,
                                 Transcript* transcript, double timeout_sec) {
  const auto [host, port] = parse_address(address);
  const auto m = static_cast<uint32_t>(preds.values.rows());
  const auto n = static_cast<uint32_t>(preds.values.cols());
  if (m == 0 || n == 0) throw ProtocolError("empty prediction matrix");

  std::optional<TcpConnection> conn;
  try {
    conn = TcpConnection::connect_to(host, port, timeout_sec);
  } catch (const Error&) {
    conn = TcpConnection::connect_to(host, port, timeout_sec);  // one retry
  }

  rng::Stream sid_stream(seed, "protocol/session", trial_id);
  SessionId sid{};
  bytes::store_u64(sid.data(), sid_stream.next_u64());
  bytes::store_u64(sid.data() + 8, sid_stream.next_u64());

  const auto expect_reply = [&](MsgKind kind) {
    Frame f = read_frame(*conn, transcript, Direction::tp_to_dc);
    if (f.kind == MsgKind::error)
      throw ProtocolError("third party error: " +
                          std::string(f.payload.begin(), f.payload.end()));
    if (f.kind != kind) throw ProtocolError("unexpected reply kind");
    return f;
  };

  Frame hello;
  hello.kind = MsgKind::hello;
  hello.session = sid;
  hello.payload = encode_hello({kProtocolVersion, trial_id, n});
  write_frame(*conn, hello, transcript, Direction::dc_to_tp);
  expect_reply(MsgKind::hello);

  const uint32_t step = rows_per_chunk(n);
  for (uint32_t start = 0; start < m; start += step) {
    const uint32_t count = std::min(step, m - start);
    PredictionsChunkHeader h;
    h.policy = request.policy;
    h.last = start + count == m;
    h.m = m;
    h.n = n;
    h.param = request.param;
    h.row_start = start;
    h.row_count = count;
    Frame chunk;
    chunk.kind = MsgKind::predictions;
    chunk.session = sid;
    chunk.payload =
        encode_predictions_chunk(h, preds.values.middleRows(start, count));
    write_frame(*conn, chunk, transcript, Direction::dc_to_tp);
  }

  const Frame reply = expect_reply(MsgKind::fair_indices);
  FairIndexSet out;
  out.indices = decode_fair_indices(reply.payload);
  if (!out.indices.empty() &&
      out.indices.back() >= static_cast<Eigen::Index>(m))
    throw ProtocolError("index set out of range");
  out.param = request.param;
  out.policy = request.policy;
  out.m = m;

  Frame bye;
  bye.kind = MsgKind::bye;
  bye.session = sid;
  write_frame(*conn, bye, transcript, Direction::dc_to_tp);
  return out;
}

// ---- transcript audit ----

namespace {

std::vector<uint8_t> serialize_doubles(const Eigen::VectorXd& v) {
  std::vector<uint8_t> out(static_cast<size_t>(v.size()) * 8);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    bytes::store_f64(out.data() + 8 * static_cast<size_t>(i), v[i]);
  return out;
}

bool contains_bytes(const std::vector<uint8_t>& haystack,
                    const std::vector<uint8_t>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(),
                     std::boyer_moore_horspool_searcher(
                         needle.begin(), needle.end())) != haystack.end();
}

}  // namespace

AuditReport audit_transcript(const Transcript& transcript,
                             const Eigen::VectorXd& s,
                             const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& y) {
  AuditReport report;
  const auto flag = [&](bool& check, const std::string& what, size_t i) {
    check = false;
    report.findings.push_back("frame " + std::to_string(i) + ": " + what);
  };

  std::vector<std::pair<std::string, std::vector<uint8_t>>> patterns;
  patterns.emplace_back("sensitive vector", serialize_doubles(s));
  patterns.emplace_back("labels", serialize_doubles(y));
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    patterns.emplace_back("feature column " + std::to_string(j),
                          serialize_doubles(x.col(j)));

  uint32_t m_seen = 0;
  for (size_t i = 0; i < transcript.entries.size(); ++i) {
    const auto& entry = transcript.entries[i];
    const auto& raw = entry.bytes;
    bool& shape_check = entry.dir == Direction::tp_to_dc ? report.shapes_ok
                                                         : report.dc_clean;
    if (raw.size() < kFrameHeaderSize ||
        std::memcmp(raw.data(), kMagic.data(), 4) != 0) {
      flag(shape_check, "not a valid frame", i);
      continue;
    }
    const uint8_t kind = raw[4];
    const uint32_t len = bytes::load_u32(raw.data() + 21);
    if (raw.size() != kFrameHeaderSize + len) {
      flag(shape_check, "frame length mismatch", i);
      continue;
    }
    const std::vector<uint8_t> payload(raw.begin() + kFrameHeaderSize,
                                       raw.end());
    if (entry.dir == Direction::dc_to_tp) {
      switch (static_cast<MsgKind>(kind)) {
        case MsgKind::hello:
          if (payload.size() != 12)
            flag(report.dc_clean, "HELLO payload not 12 bytes", i);
          break;
        case MsgKind::predictions:
          try {
            const auto h = decode_predictions_header(payload);
            m_seen = h.m;
          } catch (const Error& e) {
            flag(report.dc_clean, e.what(), i);
          }
          break;
        case MsgKind::bye:
          if (!payload.empty())
            flag(report.dc_clean, "BYE carries payload", i);
          break;
        default:
          flag(report.dc_clean,
               "kind " + std::to_string(kind) + " not allowed from DC", i);
      }
    } else {
      switch (static_cast<MsgKind>(kind)) {
        case MsgKind::hello:
          if (payload.size() != 12)
            flag(report.shapes_ok, "HELLO ack not 12 bytes", i);
          break;
        case MsgKind::fair_indices:
          try {
            const auto idx = decode_fair_indices(payload);
            if (m_seen > 0 && !idx.empty() &&
                idx.back() >= static_cast<Eigen::Index>(m_seen))
              flag(report.shapes_ok, "index out of range", i);
          } catch (const Error& e) {
            flag(report.shapes_ok, e.what(), i);
          }
          break;
        case MsgKind::error:
        case MsgKind::bye:
          break;
        default:
          flag(report.shapes_ok,
               "kind " + std::to_string(kind) + " not allowed from TP", i);
      }
    }
    for (const auto& [what, needle] : patterns) {
      if (contains_bytes(payload, needle)) {
        // One legitimate exception: nothing. Raw copies are always leaks.
        report.no_copies = false;
        report.findings.push_back("frame " + std::to_string(i) +
                                  ": payload embeds " + what);
      }
    }
  }
  return report;
}

}  // namespace dfl::proto
