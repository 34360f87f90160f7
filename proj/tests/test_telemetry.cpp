#include <doctest.h>

#include <atomic>
#include <cstring>
#include <memory>
#include <random>

#include "tiltrotor/telemetry.hpp"

using namespace tiltrotor;
using namespace tiltrotor::telemetry;

TEST_CASE("all-zero command frame matches the golden bytes") {
  const auto bytes = encode(CommandFrame{});
  std::array<std::uint8_t, kCommandFrameSize> golden{};
  golden[0] = 0xC5;
  golden[23] = 0xFF;
  golden[24] = 0xFF;
  CHECK(bytes == golden);
}

TEST_CASE("hand-computed checksum") {
  // Words 0x0201 and 0x0403 sum to 0x0604; complement 0xF9FB.
  const std::array<std::uint8_t, 4> b{1, 2, 3, 4};
  CHECK(checksum16(b) == 0xF9FB);
  // End-around carry: 0xFFFF + 0x0001 = 0x0001 after folding.
  const std::array<std::uint8_t, 4> c{0xFF, 0xFF, 0x01, 0x00};
  CHECK(checksum16(c) == static_cast<std::uint16_t>(~0x0001));
}

TEST_CASE("frame sizes") {
  CHECK(encode(CommandFrame{}).size() == 25);
  CHECK(encode(TelemetryFrame{}).size() == 17);
}

TEST_CASE("random frames round-trip bit-identically") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::uint32_t> bits;
  for (int i = 0; i < 100000; ++i) {
    CommandFrame f;
    f.seq = static_cast<std::uint16_t>(bits(rng));
    for (float& v : f.payload) v = std::bit_cast<float>(bits(rng));
    const auto d = decode_command(encode(f));
    REQUIRE(d.ok());
    REQUIRE(d.frame.seq == f.seq);
    REQUIRE(std::memcmp(d.frame.payload.data(), f.payload.data(), sizeof f.payload) == 0);
  }
  TelemetryFrame t{513, {1.5f, -9.81f, 3.0e-20f}};
  const auto dt = decode_telemetry(encode(t));
  REQUIRE(dt.ok());
  CHECK(dt.frame.seq == 513);
  CHECK(std::memcmp(dt.frame.acceleration.data(), t.acceleration.data(), sizeof t.acceleration) == 0);
}

TEST_CASE("every single-bit flip in sequence or payload is rejected") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint32_t> bits;
  for (int trial = 0; trial < 50; ++trial) {
    CommandFrame f;
    f.seq = static_cast<std::uint16_t>(bits(rng));
    for (float& v : f.payload) v = std::bit_cast<float>(bits(rng));
    const auto good = encode(f);
    for (std::size_t byte = 1; byte < kCommandFrameSize - 2; ++byte) {
      for (int bit = 0; bit < 8; ++bit) {
        auto bad = good;
        bad[byte] ^= static_cast<std::uint8_t>(1u << bit);
        REQUIRE(decode_command(bad).error == DecodeError::bad_checksum);
      }
    }
  }
}

TEST_CASE("decode error codes are distinct") {
  auto bytes = encode(CommandFrame::from_command(7, {100, 200, 300, 0.1, 0.2}));
  CHECK(decode_command(std::span(bytes.data(), 24)).error == DecodeError::length_mismatch);
  CHECK(decode_command({}).error == DecodeError::length_mismatch);
  auto wrong_magic = bytes;
  wrong_magic[0] = 0x7E;
  CHECK(decode_command(wrong_magic).error == DecodeError::bad_magic);
  auto wrong_sum = bytes;
  wrong_sum[24] ^= 1;
  CHECK(decode_command(wrong_sum).error == DecodeError::bad_checksum);
  // A telemetry frame is not a command frame.
  CHECK(decode_command(encode(TelemetryFrame{})).error == DecodeError::length_mismatch);
}

TEST_CASE("sequence comparison wraps") {
  CHECK(sequence_newer(1, 0));
  CHECK(sequence_newer(0, 65535));
  CHECK_FALSE(sequence_newer(5, 5));
  CHECK_FALSE(sequence_newer(4, 5));
  CHECK_FALSE(sequence_newer(65535, 0));
}

TEST_CASE("jitter statistics") {
  const std::vector<double> d{0.001, -0.002, 0.0, 0.003};
  const JitterStats s = jitter_statistics(d);
  CHECK(s.ticks == 4);
  CHECK(s.mean_abs == doctest::Approx(0.0015));
  CHECK(s.max_abs == doctest::Approx(0.003));
  CHECK(s.p99_abs == doctest::Approx(0.003));
}

namespace {

BodyState trim_state(const VehicleParams& p) { return solve_trim(p).state(Vec3(0, 0, -5)); }

}  // namespace

TEST_CASE("loopback session at 100 Hz") {
  const VehicleParams p = VehicleParams::defaults();
  const TrimSolution trim = solve_trim(p);
  SimulatorEndpoint sim(p, trim_state(p), {});
  sim.start();
  BridgeOptions opt;
  opt.duration = 1.0;
  std::atomic<int> with_telemetry{0};
  const SessionStats s = bridge_loop(
      [&](const std::optional<TelemetrySample>& t) {
        if (t) ++with_telemetry;
        return trim.command();
      },
      sim.port(), opt);
  sim.stop();
  CHECK(s.sent >= 98);
  CHECK(s.sent <= 102);
  CHECK(s.dropped == 0);
  CHECK(s.received > 50);
  CHECK(with_telemetry > 50);
  CHECK_FALSE(s.degraded);
  CHECK(s.jitter.p99_abs < 0.1 / opt.rate_hz);
  const SimulatorStats ss = sim.stats();
  CHECK(ss.commands_applied > 80);
  CHECK(ss.decode_errors == 0);
  CHECK_FALSE(ss.diverged);
}

TEST_CASE("silent endpoint still completes the session") {
  UdpSocket silent;
  BridgeOptions opt;
  opt.duration = 0.2;
  const SessionStats s = bridge_loop([](const auto&) { return ActuatorCommand{}; }, silent.port(), opt);
  CHECK(s.sent == 20);
  CHECK(s.received == 0);
}

TEST_CASE("nothing listening raises a connection error") {
  std::uint16_t port = 0;
  {
    UdpSocket tmp;
    port = tmp.port();
  }
  BridgeOptions opt;
  opt.duration = 0.1;
  CHECK_THROWS_AS(bridge_loop([](const auto&) { return ActuatorCommand{}; }, port, opt), ConnectionError);
}

TEST_CASE("injected drops leave the vehicle holding its last command") {
  const VehicleParams p = VehicleParams::defaults();
  const TrimSolution trim = solve_trim(p);
  SimulatorEndpoint sim(p, trim_state(p), {});
  sim.start();
  BridgeOptions opt;
  opt.duration = 2.0;
  opt.drop_probability = 0.1;
  opt.seed = 11;
  const SessionStats s = bridge_loop([&](const auto&) { return trim.command(); }, sim.port(), opt);
  sim.stop();
  CHECK(s.ticks == 200);
  CHECK(s.sent + s.dropped == s.ticks);
  const double rate = static_cast<double>(s.dropped) / static_cast<double>(s.ticks);
  CHECK(rate > 0.05);
  CHECK(rate < 0.15);
  const SimulatorStats ss = sim.stats();
  CHECK(ss.stale_ticks > 0);
  // Holding the trim command is the same as receiving it.
  const ActuatorCommand held = sim.applied_command();
  CHECK(held.omega1 == doctest::Approx(trim.omega1_trim).epsilon(1e-6));
  CHECK(held.mu_a == doctest::Approx(trim.mu_trim).epsilon(1e-6));
}

TEST_CASE("simulator cuts throttle after the configured number of missed ticks") {
  const VehicleParams p = VehicleParams::defaults();
  SimulatorOptions so;
  so.zero_throttle_after = 5;
  SimulatorEndpoint sim(p, trim_state(p), so);
  sim.start();
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  sim.stop();
  const ActuatorCommand c = sim.applied_command();
  CHECK(c.omega1 == 0.0);
  CHECK(c.omega2 == 0.0);
  CHECK(c.omega3 == 0.0);
}

TEST_CASE("simulator discards sequence regressions") {
  const VehicleParams p = VehicleParams::defaults();
  const TrimSolution trim = solve_trim(p);
  SimulatorEndpoint sim(p, trim_state(p), {});
  sim.start();
  UdpSocket tx;
  ActuatorCommand newer = trim.command();
  ActuatorCommand older = trim.command();
  older.omega1 *= 0.5;
  tx.send_to(encode(CommandFrame::from_command(10, newer)), sim.port());
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  tx.send_to(encode(CommandFrame::from_command(9, older)), sim.port());
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  const SimulatorStats ss = sim.stats();
  const ActuatorCommand applied = sim.applied_command();
  sim.stop();
  CHECK(ss.regressions_discarded == 1);
  CHECK(applied.omega1 == doctest::Approx(static_cast<float>(newer.omega1)));
}

TEST_CASE("losing the endpoint mid-session marks the session degraded") {
  const VehicleParams p = VehicleParams::defaults();
  const TrimSolution trim = solve_trim(p);
  auto sim = std::make_unique<SimulatorEndpoint>(p, trim_state(p), SimulatorOptions{});
  sim->start();
  const std::uint16_t port = sim->port();
  std::thread killer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    sim.reset();
  });
  BridgeOptions opt;
  opt.duration = 0.6;
  const SessionStats s = bridge_loop([&](const auto&) { return trim.command(); }, port, opt);
  killer.join();
  CHECK(s.ticks == 60);
  CHECK(s.degraded);
  CHECK(s.send_failures > 0);
}
