#include "tiltrotor/telemetry.hpp"

#include <Eigen/Geometry>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <random>


namespace tiltrotor::telemetry {

namespace {

void put_u16(std::uint8_t* out, std::uint16_t v) {
  out[0] = static_cast<std::uint8_t>(v & 0xFF);
  out[1] = static_cast<std::uint8_t>(v >> 8);
}

std::uint16_t get_u16(const std::uint8_t* in) {
  return static_cast<std::uint16_t>(in[0] | (in[1] << 8));
}

void put_f32(std::uint8_t* out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(bits >> (8 * i));
}

float get_f32(const std::uint8_t* in) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(in[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

template <std::size_t N, std::size_t P>
std::array<std::uint8_t, N> encode_frame(std::uint8_t magic, std::uint16_t seq, const std::array<float, P>& values) {
  static_assert(N == 1 + 2 + 4 * P + 2);
  std::array<std::uint8_t, N> out{};
  out[0] = magic;
  put_u16(out.data() + 1, seq);
  for (std::size_t i = 0; i < P; ++i) put_f32(out.data() + 3 + 4 * i, values[i]);
  put_u16(out.data() + N - 2, checksum16(std::span(out.data() + 1, N - 3)));
  return out;
}

template <std::size_t N, std::size_t P>
DecodeError decode_frame(std::span<const std::uint8_t> bytes, std::uint8_t magic, std::uint16_t& seq,
                         std::array<float, P>& values) {
  if (bytes.size() != N) return DecodeError::length_mismatch;
  if (bytes[0] != magic) return DecodeError::bad_magic;
  if (checksum16(bytes.subspan(1, N - 3)) != get_u16(bytes.data() + N - 2)) return DecodeError::bad_checksum;
  seq = get_u16(bytes.data() + 1);
  for (std::size_t i = 0; i < P; ++i) values[i] = get_f32(bytes.data() + 3 + 4 * i);
  return DecodeError::none;
}

sockaddr_in loopback(std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  return addr;
}

}  // namespace

CommandFrame CommandFrame::from_command(std::uint16_t seq, const ActuatorCommand& cmd) {
  return {seq,
          {static_cast<float>(cmd.omega1), static_cast<float>(cmd.omega2), static_cast<float>(cmd.omega3),
           static_cast<float>(cmd.mu_a), static_cast<float>(cmd.mu_b)}};
}

ActuatorCommand CommandFrame::command() const {
  return {payload[0], payload[1], payload[2], payload[3], payload[4]};
}

std::string_view to_string(DecodeError e) {
  switch (e) {
    case DecodeError::none: return "none";
    case DecodeError::length_mismatch: return "length_mismatch";
    case DecodeError::bad_magic: return "bad_magic";
    case DecodeError::bad_checksum: return "bad_checksum";
  }
  return "unknown";
}

std::uint16_t checksum16(std::span<const std::uint8_t> bytes) {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i < bytes.size(); i += 2) {
    const std::uint32_t hi = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    sum += bytes[i] | (hi << 8);
    sum = (sum & 0xFFFF) + (sum >> 16);
  }
  return static_cast<std::uint16_t>(~sum & 0xFFFF);
}

std::array<std::uint8_t, kCommandFrameSize> encode(const CommandFrame& frame) {
  return encode_frame<kCommandFrameSize>(kCommandMagic, frame.seq, frame.payload);
}

std::array<std::uint8_t, kTelemetryFrameSize> encode(const TelemetryFrame& frame) {
  return encode_frame<kTelemetryFrameSize>(kTelemetryMagic, frame.seq, frame.acceleration);
}

Decoded<CommandFrame> decode_command(std::span<const std::uint8_t> bytes) {
  Decoded<CommandFrame> out;
  out.error = decode_frame<kCommandFrameSize>(bytes, kCommandMagic, out.frame.seq, out.frame.payload);
  return out;
}

Decoded<TelemetryFrame> decode_telemetry(std::span<const std::uint8_t> bytes) {
  Decoded<TelemetryFrame> out;
  out.error = decode_frame<kTelemetryFrameSize>(bytes, kTelemetryMagic, out.frame.seq, out.frame.acceleration);
  return out;
}

bool sequence_newer(std::uint16_t seq, std::uint16_t last) {
  return static_cast<std::int16_t>(static_cast<std::uint16_t>(seq - last)) > 0;
}

UdpSocket::UdpSocket(std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw ConnectionError(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr = loopback(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd_);
    throw ConnectionError("bind 127.0.0.1:" + std::to_string(port) + ": " + msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

UdpSocket::~UdpSocket() {
  if (fd_ >= 0) ::close(fd_);
}

UdpSocket::UdpSocket(UdpSocket&& other) noexcept : fd_(other.fd_), port_(other.port_) { other.fd_ = -1; }

UdpSocket& UdpSocket::operator=(UdpSocket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.fd_;
    port_ = other.port_;
    other.fd_ = -1;
  }
  return *this;
}

void UdpSocket::connect(std::uint16_t peer_port) {
  sockaddr_in addr = loopback(peer_port);
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw ConnectionError("connect 127.0.0.1:" + std::to_string(peer_port) + ": " + std::strerror(errno));
  }
}

bool UdpSocket::send(std::span<const std::uint8_t> bytes) {
  const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
  return n == static_cast<ssize_t>(bytes.size());
}

bool UdpSocket::send_to(std::span<const std::uint8_t> bytes, std::uint16_t peer_port) {
  const sockaddr_in addr = loopback(peer_port);
  const ssize_t n = ::sendto(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL,
                             reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
  return n == static_cast<ssize_t>(bytes.size());
}

long UdpSocket::receive(std::span<std::uint8_t> buffer, std::chrono::microseconds timeout,
                        std::uint16_t* from_port) {
  pollfd pfd{fd_, POLLIN, 0};
  const int ms = static_cast<int>(std::max<long long>(0, (timeout.count() + 999) / 1000));
  if (::poll(&pfd, 1, ms) <= 0) return 0;
  sockaddr_in from{};
  socklen_t len = sizeof from;
  const ssize_t n =
      ::recvfrom(fd_, buffer.data(), buffer.size(), MSG_DONTWAIT, reinterpret_cast<sockaddr*>(&from), &len);
  if (n < 0) return errno == ECONNREFUSED ? -1 : 0;
  if (from_port) *from_port = ntohs(from.sin_port);
  return static_cast<long>(n);
}

JitterStats jitter_statistics(std::span<const double> deviations) {
  JitterStats s;
  s.ticks = deviations.size();
  if (deviations.empty()) return s;
  std::vector<double> a(deviations.begin(), deviations.end());
  for (double& v : a) v = std::abs(v);
  std::sort(a.begin(), a.end());
  double sum = 0.0;
  for (const double v : a) sum += v;
  s.mean_abs = sum / static_cast<double>(a.size());
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(a.size())));
  s.p99_abs = a[std::max<std::size_t>(rank, 1) - 1];
  s.max_abs = a.back();
  return s;
}

// ---------------------------------------------------------------------------

SimulatorEndpoint::SimulatorEndpoint(VehicleParams params, BodyState initial, SimulatorOptions options)
    : params_(params), options_(options), socket_(options.port), port_(socket_.port()), state_(initial) {
  params_.validate();
  if (!(options_.rate_hz > 0.0)) throw std::invalid_argument("simulator rate must be > 0");
  const TrimSolution trim = solve_trim(params_);
  command_ = trim.command();
}

SimulatorEndpoint::~SimulatorEndpoint() { stop(); }

void SimulatorEndpoint::start() {
  if (running_.exchange(true)) return;
  thread_ = std::thread([this] { run(); });
}

void SimulatorEndpoint::stop() {
  running_ = false;
  if (thread_.joinable()) thread_.join();
}

SimulatorStats SimulatorEndpoint::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

BodyState SimulatorEndpoint::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

ActuatorCommand SimulatorEndpoint::applied_command() const {
  std::lock_guard lock(mutex_);
  return command_;
}

void SimulatorEndpoint::run() {
  using clock = std::chrono::steady_clock;
  const auto period =
      std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / options_.rate_hz));
  std::optional<std::uint16_t> last_seq;
  std::optional<std::uint16_t> peer;
  int missed = 0;
  std::uint16_t tx_seq = 0;
  std::array<std::uint8_t, 64> buf{};
  auto next = clock::now();

  while (running_) {
    next += period;
    // Collect everything that arrives before this tick's deadline.
    std::optional<CommandFrame> newest;
    std::size_t regressions = 0, errors = 0;
    while (true) {
      const auto wait = std::chrono::duration_cast<std::chrono::microseconds>(next - clock::now());
      if (wait.count() <= 0) break;
      std::uint16_t from = 0;
      const long n = socket_.receive(buf, wait, &from);
      if (n <= 0) continue;
      const auto d = decode_command(std::span(buf.data(), static_cast<std::size_t>(n)));
      if (!d.ok()) {
        ++errors;
        continue;
      }
      peer = from;
      if (last_seq && !sequence_newer(d.frame.seq, *last_seq)) {
        ++regressions;
        continue;
      }
      last_seq = d.frame.seq;
      newest = d.frame;
    }

    Vec3 accel = Vec3::Zero();
    {
      std::lock_guard lock(mutex_);
      stats_.regressions_discarded += regressions;
      stats_.decode_errors += errors;
      ++stats_.ticks;
      if (newest) {
        command_ = newest->command().clamped(params_);
        ++stats_.commands_applied;
        missed = 0;
      } else {
        ++stats_.stale_ticks;
        ++missed;
        if (options_.zero_throttle_after > 0 && missed >= options_.zero_throttle_after) {
          command_.omega1 = command_.omega2 = command_.omega3 = 0.0;
        }
      }
      if (!stats_.diverged) {
        try {
          const BodyStateDerivative d = state_derivative(state_, rotor_wrench(command_, params_), params_);
          accel = d.velocity_rate + state_.rates.cross(state_.velocity);
          state_ = integrate_step(state_, command_, params_);
        } catch (const std::exception&) {
          stats_.diverged = true;
        }
      }
    }
    if (peer) {
      const auto out = encode(TelemetryFrame{
          tx_seq++, {static_cast<float>(accel.x()), static_cast<float>(accel.y()), static_cast<float>(accel.z())}});
      if (socket_.send_to(out, *peer)) {
        std::lock_guard lock(mutex_);
        ++stats_.telemetry_sent;
      }
    }
  }
}

SessionStats bridge_loop(const BridgeController& controller, std::uint16_t sim_port, const BridgeOptions& options) {
  using clock = std::chrono::steady_clock;
  if (!(options.rate_hz > 0.0) || !(options.duration >= 0.0)) {
    throw std::invalid_argument("bridge rate must be > 0 and duration >= 0");
  }
  if (!(options.drop_probability >= 0.0 && options.drop_probability <= 1.0)) {
    throw std::invalid_argument("drop probability must lie in [0, 1]");
  }

  UdpSocket socket;
  socket.connect(sim_port);
  // An empty datagram to a closed loopback port comes back as ECONNREFUSED.
  socket.send({});
  std::array<std::uint8_t, 64> probe{};
  if (socket.receive(probe, options.connect_timeout) < 0) {
    throw ConnectionError("no simulator endpoint listening on 127.0.0.1:" + std::to_string(sim_port));
  }

  SessionStats stats;
  LatestValue<TelemetrySample> latest;
  std::atomic<bool> running{true};
  std::atomic<std::size_t> received{0}, decode_errors{0}, regressions{0}, refusals{0};

  std::thread uplink([&] {
    std::array<std::uint8_t, 64> buf{};
    std::optional<std::uint16_t> last_seq;
    while (running) {
      const long n = socket.receive(buf, std::chrono::milliseconds(5));
      if (n < 0) {
        ++refusals;
        continue;
      }
      if (n == 0) continue;
      const auto d = decode_telemetry(std::span(buf.data(), static_cast<std::size_t>(n)));
      if (!d.ok()) {
        ++decode_errors;
        continue;
      }
      if (last_seq && !sequence_newer(d.frame.seq, *last_seq)) {
        ++regressions;
        continue;
      }
      last_seq = d.frame.seq;
      ++received;
      latest.publish({d.frame, clock::now()});
    }
  });

  std::mt19937_64 rng(options.seed);
  std::bernoulli_distribution drop(options.drop_probability);
  const double period = 1.0 / options.rate_hz;
  const auto ticks = static_cast<std::size_t>(std::llround(options.duration * options.rate_hz));
  std::vector<double> deviations;
  deviations.reserve(ticks);
  const auto t0 = clock::now();
  std::uint16_t seq = 0;
  for (std::size_t i = 0; i < ticks; ++i) {
    const auto scheduled = t0 + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(i * period));
    std::this_thread::sleep_until(scheduled);
    deviations.push_back(std::chrono::duration<double>(clock::now() - scheduled).count());

    const ActuatorCommand cmd = controller(latest.get());
    const auto frame = encode(CommandFrame::from_command(seq++, cmd));
    ++stats.ticks;
    if (drop(rng)) {
      ++stats.dropped;
      continue;
    }
    if (socket.send(frame)) {
      ++stats.sent;
    } else {
      ++stats.send_failures;
    }
  }
  running = false;
  uplink.join();

  stats.received = received;
  stats.decode_errors = decode_errors;
  stats.regressions_discarded = regressions;
  stats.send_failures += refusals;
  stats.degraded = stats.send_failures > 0;
  stats.jitter = jitter_statistics(deviations);
  return stats;
}

}  // namespace tiltrotor::telemetry
