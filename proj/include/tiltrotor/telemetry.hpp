#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "tiltrotor/vehicle.hpp"

namespace tiltrotor::telemetry {

// Wire layout (all multi-byte fields little-endian):
//   command:   0xC5 | seq u16 | 5 x f32 (omega1, omega2, omega3, mu_a, mu_b) | checksum u16   (25 bytes)
//   telemetry: 0x7E | seq u16 | 3 x f32 (body acceleration x, y, z)          | checksum u16   (17 bytes)
// checksum = ~(ones-complement sum of the 16-bit words from seq through the payload).

inline constexpr std::uint8_t kCommandMagic = 0xC5;
inline constexpr std::uint8_t kTelemetryMagic = 0x7E;
inline constexpr std::size_t kCommandFrameSize = 25;
inline constexpr std::size_t kTelemetryFrameSize = 17;

struct CommandFrame {
  std::uint16_t seq = 0;
  std::array<float, 5> payload{};

  static CommandFrame from_command(std::uint16_t seq, const ActuatorCommand& cmd);
  ActuatorCommand command() const;
};

struct TelemetryFrame {
  std::uint16_t seq = 0;
  std::array<float, 3> acceleration{};
};

enum class DecodeError { none, length_mismatch, bad_magic, bad_checksum };
std::string_view to_string(DecodeError e);

template <class Frame>
struct Decoded {
  DecodeError error = DecodeError::none;
  Frame frame{};
  bool ok() const { return error == DecodeError::none; }
};

/// Ones-complement sum of little-endian 16-bit words, complemented. Odd
/// trailing bytes are padded with zero.
std::uint16_t checksum16(std::span<const std::uint8_t> bytes);

std::array<std::uint8_t, kCommandFrameSize> encode(const CommandFrame& frame);
std::array<std::uint8_t, kTelemetryFrameSize> encode(const TelemetryFrame& frame);
Decoded<CommandFrame> decode_command(std::span<const std::uint8_t> bytes);
Decoded<TelemetryFrame> decode_telemetry(std::span<const std::uint8_t> bytes);

/// True when `seq` is newer than `last` in 16-bit serial-number arithmetic.
bool sequence_newer(std::uint16_t seq, std::uint16_t last);

class ConnectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// IPv4 loopback datagram socket.
class UdpSocket {
 public:
  /// Binds 127.0.0.1:port (0 picks a free port).
  explicit UdpSocket(std::uint16_t port = 0);
  ~UdpSocket();
  UdpSocket(UdpSocket&& other) noexcept;
  UdpSocket& operator=(UdpSocket&& other) noexcept;
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  std::uint16_t port() const { return port_; }
  /// Fixes the peer so ICMP port-unreachable surfaces as ECONNREFUSED.
  void connect(std::uint16_t peer_port);
  /// Returns false when the peer refused (nothing listening).
  bool send(std::span<const std::uint8_t> bytes);
  bool send_to(std::span<const std::uint8_t> bytes, std::uint16_t peer_port);
  /// Waits up to `timeout`; returns the datagram size, 0 on timeout or an
  /// empty datagram, -1 on refusal. `from_port` receives the sender's port.
  long receive(std::span<std::uint8_t> buffer, std::chrono::microseconds timeout,
               std::uint16_t* from_port = nullptr);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Latest-value handoff between one producer and one consumer thread.
template <class T>
class LatestValue {
 public:
  void publish(const T& v) {
    std::lock_guard lock(mutex_);
    value_ = v;
    ++version_;
  }
  std::optional<T> get() const {
    std::lock_guard lock(mutex_);
    return value_;
  }
  std::uint64_t version() const {
    std::lock_guard lock(mutex_);
    return version_;
  }

 private:
  mutable std::mutex mutex_;
  std::optional<T> value_;
  std::uint64_t version_ = 0;
};

struct JitterStats {
  double mean_abs = 0.0;  ///< s, mean |actual - scheduled| tick time
  double p99_abs = 0.0;
  double max_abs = 0.0;
  std::size_t ticks = 0;
};

/// Percentiles of |tick time - schedule| (nearest-rank).
JitterStats jitter_statistics(std::span<const double> deviations);

struct SimulatorOptions {
  double rate_hz = 100.0;
  int zero_throttle_after = 0;  ///< missed ticks before cutting throttle; 0 holds forever
  std::uint16_t port = 0;
};

struct SimulatorStats {
  std::size_t ticks = 0;
  std::size_t commands_applied = 0;
  std::size_t stale_ticks = 0;  ///< ticks that reused the previous command
  std::size_t regressions_discarded = 0;
  std::size_t decode_errors = 0;
  std::size_t telemetry_sent = 0;
  bool diverged = false;
};

/// Vehicle simulator behind a datagram port. Each tick it applies the newest
/// valid command received since the last tick (holding the previous one when
/// none arrived), integrates one step, and replies with body acceleration.
class SimulatorEndpoint {
 public:
  SimulatorEndpoint(VehicleParams params, BodyState initial, SimulatorOptions options);
  ~SimulatorEndpoint();

  std::uint16_t port() const { return port_; }
  void start();
  void stop();

  SimulatorStats stats() const;
  BodyState state() const;
  ActuatorCommand applied_command() const;

 private:
  void run();

  VehicleParams params_;
  SimulatorOptions options_;
  UdpSocket socket_;
  std::uint16_t port_ = 0;
  std::thread thread_;
  std::atomic<bool> running_{false};

  mutable std::mutex mutex_;
  BodyState state_;
  ActuatorCommand command_;
  SimulatorStats stats_;
};

struct BridgeOptions {
  double rate_hz = 100.0;
  double duration = 1.0;       ///< s
  double drop_probability = 0.0;  ///< injected downlink loss
  std::uint64_t seed = 0;
  std::chrono::milliseconds connect_timeout{30};
};

struct SessionStats {
  std::size_t ticks = 0;
  std::size_t sent = 0;
  std::size_t dropped = 0;  ///< frames withheld by drop injection
  std::size_t received = 0;
  std::size_t decode_errors = 0;
  std::size_t regressions_discarded = 0;
  std::size_t send_failures = 0;  ///< peer refused mid-session
  bool degraded = false;
  JitterStats jitter;
};

struct TelemetrySample {
  TelemetryFrame frame;
  std::chrono::steady_clock::time_point received;
};

/// Produces the next command given the latest telemetry, if any.
using BridgeController = std::function<ActuatorCommand(const std::optional<TelemetrySample>&)>;

/// Ground-station session: a downlink flow ticking at rate_hz that queries the
/// controller and sends command frames, and an uplink flow that ingests
/// telemetry. Throws ConnectionError when nothing listens on sim_port at start.
SessionStats bridge_loop(const BridgeController& controller, std::uint16_t sim_port, const BridgeOptions& options);

}  // namespace tiltrotor::telemetry
