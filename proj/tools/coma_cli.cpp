// coma — operator entry point for the chip-pair toolbench.
//
// Subcommands drive the library end to end: `activate` runs a local
// trusted/untrusted session and dumps a JSON transcript, `attack` reproduces
// the key-extraction tables, `cost` regenerates the latency/energy sweeps,
// `health` runs the entropy and PUF health suites, and `serve`/`device` run
// the remote activation flow over TCP.
//
// Conventions:
//   - Reports are composed fully in memory and written last, so a failing
//     configuration never leaves a partial output file behind.
//   - A fixed --seed makes every JSON/CSV byte-identical across runs; the
//     one exception is measured wall-clock in `attack`, which --zero-time
//     normalizes for diff-able CI artifacts.
//   - Exit codes: 0 ok, 2 config, 3 protocol/auth, 4 network, 5 timeout.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coma/attacks.hpp"
#include "coma/channel.hpp"
#include "coma/costmodel.hpp"
#include "coma/protocol.hpp"
#include "coma/puf.hpp"
#include "coma/registry.hpp"
#include "coma/remote.hpp"
#include "coma/rng.hpp"

using nlohmann::json;

namespace {

constexpr std::uint64_t default_seed = 0x434f4d41;  // "COMA"

std::string error_kind(const coma::Error& e) {
  if (dynamic_cast<const coma::ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const coma::UnlockFailure*>(&e)) return "UnlockFailure";
  if (dynamic_cast<const coma::EntropyFailure*>(&e)) return "EntropyFailure";
  if (dynamic_cast<const coma::KeyInstability*>(&e)) return "KeyInstability";
  if (dynamic_cast<const coma::ReadoutDisabled*>(&e)) return "ReadoutDisabled";
  if (dynamic_cast<const coma::AuthFailure*>(&e)) return "AuthFailure";
  if (dynamic_cast<const coma::ProtocolError*>(&e)) return "ProtocolError";
  if (dynamic_cast<const coma::TimeoutError*>(&e)) return "TimeoutError";
  if (dynamic_cast<const coma::NetworkError*>(&e)) return "NetworkError";
  return "Error";
}

json error_json(const coma::Error& e) {
  return json{{"kind", error_kind(e)},
              {"exit", static_cast<int>(e.code)},
              {"message", e.what()}};
}

std::string to_hex(const coma::Bytes& b) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(b.size() * 2);
  for (std::uint8_t v : b) {
    out.push_back(digits[v >> 4]);
    out.push_back(digits[v & 0xf]);
  }
  return out;
}

// Compose-then-write: the report exists only once the command succeeded far
// enough to have something coherent to say.
void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
  if (!f) throw coma::ConfigError("cannot open output file: " + out_path);
  f << text;
  if (!f.flush()) throw coma::ConfigError("write failed: " + out_path);
}

coma::ProtocolConfig config_for(const std::string& profile, std::uint32_t n_override,
                                std::uint32_t u_override) {
  coma::ProtocolConfig cfg = coma::ProtocolConfig::for_profile(profile);
  if (n_override != 0) cfg.cost.n = n_override;
  if (u_override != 0) cfg.cost.u_blocks = u_override;
  cfg.validate();
  return cfg;
}

// ---- activate -------------------------------------------------------------

struct ActivateOpts {
  std::string profile = "coma2";
  std::uint32_t n = 0;  // 0 = profile default
  std::uint32_t u = 0;
  std::uint64_t device_id = 1;
  std::string out;
  std::string tamper;  // "frame:K" or "frame:K:BIT"
  std::string replay;  // path to a previous transcript
};

coma::TamperSpec parse_tamper(const std::string& spec) {
  std::istringstream is(spec);
  std::string what;
  std::getline(is, what, ':');
  if (what != "frame") throw coma::ConfigError("--tamper expects frame:K[:BIT]");
  coma::TamperSpec t;
  char sep = 0;
  if (!(is >> t.frame_index)) throw coma::ConfigError("--tamper expects frame:K[:BIT]");
  if (is >> sep) {
    if (sep != ':' || !(is >> t.bit)) throw coma::ConfigError("--tamper expects frame:K[:BIT]");
  }
  return t;
}

std::vector<coma::BitVec> dal_from_transcript(const std::string& path, std::uint32_t n) {
  std::ifstream f(path);
  if (!f) throw coma::ConfigError("cannot read transcript: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw coma::ConfigError(std::string{"bad transcript JSON: "} + e.what());
  }
  if (!j.contains("session") || !j["session"].contains("dal"))
    throw coma::ConfigError("transcript has no recorded DAL");
  std::vector<coma::BitVec> dal;
  try {
    for (const auto& h : j["session"]["dal"])
      dal.push_back(coma::BitVec::from_hex(h.get<std::string>(), n));
  } catch (const std::exception& e) {
    throw coma::ConfigError(std::string{"bad DAL in transcript: "} + e.what());
  }
  if (dal.empty()) throw coma::ConfigError("transcript has an empty DAL");
  return dal;
}

int cmd_activate(std::uint64_t seed, const ActivateOpts& o) {
  coma::ProtocolConfig cfg = config_for(o.profile, o.n, o.u);
  std::vector<coma::BitVec> replay_dal;
  if (!o.replay.empty()) replay_dal = dal_from_transcript(o.replay, cfg.n());
  std::optional<coma::TamperSpec> tamper;
  if (!o.tamper.empty()) tamper = parse_tamper(o.tamper);

  coma::DevicePair pair = coma::make_device_pair(cfg, o.device_id, seed);
  coma::enroll(pair.trusted, pair.device);

  coma::Channel ch;
  if (tamper) ch.set_tamper(*tamper);

  json report;
  report["command"] = "activate";
  report["seed"] = seed;
  report["profile"] = cfg.cost.profile;
  report["n"] = cfg.n();
  report["update_period"] = cfg.cost.u_blocks;
  report["device_id"] = o.device_id;
  if (tamper) report["tamper"] = {{"frame", tamper->frame_index}, {"bit", tamper->bit}};

  int rc = 0;
  try {
    coma::UnlockResult res = coma::activate_pair(pair.trusted, pair.device, ch);
    if (!replay_dal.empty() && replay_dal == pair.device.last_dal()) {
      // The transcript being replayed came from this very seed, so the first
      // session reproduced it bit for bit. Run a second session to advance to
      // a fresh TRN epoch; a replay demo against the recording session itself
      // would not be a replay.
      res = coma::activate_pair(pair.trusted, pair.device, ch);
    }
    json session;
    session["session_id"] = pair.trusted.session_id();
    session["trn"] = pair.trusted.activation_trn().to_hex();
    session["cycles"] = {{"trusted", pair.trusted.cycles()}, {"device", pair.device.cycles()}};
    json dal = json::array();
    for (const coma::BitVec& seg : pair.device.last_dal()) dal.push_back(seg.to_hex());
    session["dal"] = dal;
    report["session"] = session;
    report["result"] = {{"success", res.success}};

    if (!replay_dal.empty()) {
      // Replaying a recorded DAL against the fresh TRN must fail the
      // self-check and leave the circuit locked.
      bool ok = pair.device.apply_dal(replay_dal);
      if (ok) {
        report["result"] = {{"success", true}, {"replay_accepted", true}};
      } else {
        coma::UnlockFailure uf("replayed DAL rejected by self-check");
        report["result"] = {{"success", false}, {"error", error_json(uf)}};
        rc = static_cast<int>(uf.code);
      }
      report["replay"] = {{"source", o.replay}, {"segments", replay_dal.size()},
                          {"accepted", ok}};
    }
  } catch (const coma::Error& e) {
    report["result"] = {{"success", false}, {"error", error_json(e)}};
    rc = static_cast<int>(e.code);
  }

  json frames = json::array();
  for (const coma::TranscriptEntry& t : ch.transcript())
    frames.push_back({{"seq", t.seq}, {"dir", t.dir}, {"raw", to_hex(t.raw)}});
  report["frames"] = frames;

  emit(report.dump(2) + "\n", o.out);
  return rc;
}

// ---- attack ---------------------------------------------------------------

struct AttackOpts {
  std::string kind = "sat";  // "sat" or "affine"
  std::vector<std::uint32_t> sizes{4, 8, 16};
  std::vector<std::string> kinds{"blk", "nonblk"};
  std::uint32_t n = 4;        // affine demo width
  std::uint32_t blocks = 5;   // affine demo verification blocks
  std::uint64_t timeout_ms = 60000;
  bool zero_time = false;
  std::string out;
};

coma::NetworkKind kind_from_name(const std::string& name) {
  if (name == "blk") return coma::NetworkKind::omega;
  if (name == "nonblk") return coma::NetworkKind::log_extra_stage;
  throw coma::ConfigError("unknown network kind: " + name + " (expected blk or nonblk)");
}

int cmd_attack_sat(std::uint64_t seed, const AttackOpts& o) {
  for (std::uint32_t n : o.sizes)
    if (n < 4 || n > 64) throw coma::ConfigError("--sizes entries must be in 4..64");
  std::vector<coma::NetworkKind> kinds;
  for (const std::string& k : o.kinds) kinds.push_back(kind_from_name(k));

  auto rows = coma::attack_sweep(o.sizes, kinds, seed,
                                 std::chrono::milliseconds(o.timeout_ms));
  std::ostringstream csv;
  csv << "size,kind,iterations,seconds,outcome\n";
  csv.setf(std::ios::fixed);
  csv.precision(3);
  for (const coma::AttackSweepRow& r : rows) {
    std::string outcome = r.outcome == "timeout" ? "TO" : r.outcome;
    double secs = o.zero_time ? 0.0 : r.seconds;
    csv << r.size << ',' << coma::to_string(r.kind) << ',' << r.iterations << ',' << secs
        << ',' << outcome << '\n';
  }
  emit(csv.str(), o.out);
  return 0;
}

int cmd_attack_affine(std::uint64_t seed, const AttackOpts& o) {
  if (o.n < 4 || o.n > 64) throw coma::ConfigError("--n must be in 4..64");
  coma::NetworkTopology topo = coma::build_network(o.n, coma::NetworkKind::omega);
  coma::Rng rng(seed);
  coma::Trn hidden(topo, rng.next_bits(topo.config_bits()));

  // Chosen plaintexts {0, e_0..e_{n-1}} pin the whole affine map.
  std::vector<std::pair<coma::BitVec, coma::BitVec>> pairs;
  coma::BitVec zero(o.n);
  pairs.emplace_back(zero, coma::csn_forward(topo, hidden, zero));
  for (std::uint32_t i = 0; i < o.n; ++i) {
    coma::BitVec e(o.n);
    e.set(i, true);
    pairs.emplace_back(e, coma::csn_forward(topo, hidden, e));
  }
  coma::AffineResult res = coma::affine_recover(pairs);

  std::uint32_t verified = 0;
  std::string map;
  if (res.status == coma::AffineStatus::ok) {
    for (std::uint32_t b = 0; b < o.blocks; ++b) {
      coma::BitVec x = rng.next_bits(o.n);
      if (res.model.apply(x) == coma::csn_forward(topo, hidden, x)) ++verified;
    }
    // Serialize the map by its action: column i is f(e_i) ^ f(0).
    std::ostringstream m;
    for (std::uint32_t i = 0; i < o.n; ++i) {
      coma::BitVec e(o.n);
      e.set(i, true);
      m << (res.model.apply(e) ^ res.model.b).to_hex() << ':';
    }
    m << res.model.b.to_hex();
    map = m.str();
  }

  std::ostringstream csv;
  csv << "n,status,blocks,verified,map\n";
  csv << o.n << ',' << coma::to_string(res.status) << ',' << o.blocks << ',' << verified
      << ',' << map << '\n';
  emit(csv.str(), o.out);
  return 0;
}

int cmd_attack(std::uint64_t seed, const AttackOpts& o) {
  if (o.kind == "sat") return cmd_attack_sat(seed, o);
  if (o.kind == "affine") return cmd_attack_affine(seed, o);
  throw coma::ConfigError("unknown attack kind: " + o.kind + " (expected sat or affine)");
}

// ---- cost -----------------------------------------------------------------

struct CostOpts {
  std::vector<std::string> profiles{"coma1", "coma2"};
  std::vector<std::string> modes{"dcc", "lcc"};
  std::uint64_t min_bytes = 16;
  std::uint64_t max_bytes = 64 * 1024;
  std::string out;
};

int cmd_cost(const CostOpts& o) {
  std::vector<coma::CostParams> profiles;
  for (const std::string& name : o.profiles)
    profiles.push_back(coma::profile_by_name(name));
  for (const std::string& m : o.modes)
    if (m != "dcc" && m != "lcc")
      throw coma::ConfigError("unknown mode: " + m + " (expected dcc or lcc)");
  if (o.min_bytes == 0 || o.min_bytes > o.max_bytes)
    throw coma::ConfigError("need 0 < --min-bytes <= --max-bytes");

  std::vector<std::uint64_t> sizes;
  for (std::uint64_t b = o.min_bytes; b <= o.max_bytes; b *= 2) sizes.push_back(b);

  std::vector<coma::SweepRow> rows = coma::sweep(profiles, sizes);
  std::ostringstream csv;
  csv << "profile,mode,bytes,cycles,energy\n";
  csv.setf(std::ios::fixed);
  csv.precision(3);
  for (const coma::SweepRow& r : rows) {
    if (std::find(o.modes.begin(), o.modes.end(), r.mode) == o.modes.end()) continue;
    csv << r.profile << ',' << r.mode << ',' << r.bytes << ',' << r.cycles << ','
        << r.energy_mwc << '\n';
  }
  // Plot-ready footers: the DCC profile crossover and the LCC per-byte
  // asymptote for each profile.
  if (profiles.size() == 2) {
    coma::Crossover x = coma::crossover(profiles[0], profiles[1]);
    csv << "# crossover " << x.fast_start << "->" << x.slow_start
        << ": computed=" << x.computed_bytes << " bytes";
    if (x.quoted_bytes != 0)
      csv << ", quoted=" << x.quoted_bytes << " bytes, discrepancy="
          << (x.discrepancy ? "yes" : "no");
    csv << '\n';
  }
  for (const coma::CostParams& p : profiles) {
    coma::Ratio r = coma::c_byte_lcc(p);
    csv << "# lcc per-byte asymptote " << p.profile << ": " << r.num << '/' << r.den
        << " cycles (n=" << p.n << ", bw=" << p.bw << ")\n";
  }
  emit(csv.str(), o.out);
  return 0;
}

// ---- health ---------------------------------------------------------------

struct HealthOpts {
  std::string inject = "none";  // none|biased|stuck0|stuck1
  double bias = 0.7;
  std::uint64_t bits = 4096;
  std::string puf = "arbiter";  // arbiter|pseudo
  std::string out;
};

int cmd_health(std::uint64_t seed, const HealthOpts& o) {
  coma::EntropySource::Mode mode;
  if (o.inject == "none")
    mode = coma::EntropySource::Mode::ideal;
  else if (o.inject == "biased")
    mode = coma::EntropySource::Mode::biased;
  else if (o.inject == "stuck0")
    mode = coma::EntropySource::Mode::stuck_zero;
  else if (o.inject == "stuck1")
    mode = coma::EntropySource::Mode::stuck_one;
  else
    throw coma::ConfigError("unknown --inject: " + o.inject +
                            " (expected none, biased, stuck0 or stuck1)");
  if (o.puf != "arbiter" && o.puf != "pseudo")
    throw coma::ConfigError("unknown --puf: " + o.puf + " (expected arbiter or pseudo)");
  if (o.bits == 0) throw coma::ConfigError("--bits must be positive");

  coma::EntropySource src(seed, mode, o.bias);
  coma::HealthMonitor mon;
  for (std::uint64_t i = 0; i < o.bits; ++i) mon.feed(src.next_bit());

  json alarms = json::array();
  for (const coma::HealthAlarm& a : mon.alarms()) {
    if (alarms.size() == 8) break;  // first few are enough for a report
    alarms.push_back({{"test", a.kind == coma::HealthAlarm::Kind::repetition ? "rct" : "apt"},
                      {"bit_index", a.bit_index},
                      {"count", a.count}});
  }

  std::unique_ptr<coma::PufOracle> puf;
  if (o.puf == "pseudo")
    puf = std::make_unique<coma::PseudoPuf>(seed);
  else
    puf = std::make_unique<coma::ArbiterPuf>(seed);
  coma::PufHealthReport pr = coma::puf_health_check(*puf, seed ^ 0x5055465f48454cull);

  json report;
  report["command"] = "health";
  report["seed"] = seed;
  report["rng"] = {{"inject", o.inject},
                   {"bits", o.bits},
                   {"rct", {{"cutoff", mon.rct().cutoff()}, {"alarmed", mon.rct().alarmed()}}},
                   {"apt",
                    {{"window", mon.apt().window()},
                     {"cutoff", mon.apt().cutoff()},
                     {"alarmed", mon.apt().alarmed()}}},
                   {"alarms", alarms},
                   {"healthy", mon.healthy()}};
  report["puf"] = {{"kind", o.puf},
                   {"bias", pr.bias},
                   {"max_flip_deviation", pr.max_flip_deviation},
                   {"verdict", pr.genuine ? "genuine" : "pseudo"}};
  report["pass"] = mon.healthy() && pr.genuine;
  emit(report.dump(2) + "\n", o.out);
  return 0;  // a completed report is a success even when it reports alarms
}

// ---- serve / device -------------------------------------------------------

struct ServeOpts {
  std::uint16_t port = 0;
  std::string registry;
  std::uint64_t devices = 0;  // pre-enroll fabricated devices 1..K
  std::uint64_t sessions = 0; // exit after N sessions; 0 = run until SIGINT
  std::string profile = "coma2";
  std::string log;
};

std::atomic<bool> g_stop{false};
void handle_sigint(int) { g_stop.store(true); }

int cmd_serve(std::uint64_t seed, const ServeOpts& o) {
  coma::ProtocolConfig cfg = coma::ProtocolConfig::for_profile(o.profile);
  coma::Registry owned = o.registry.empty() ? coma::Registry{} : coma::Registry{o.registry};

  // Fabricate and enroll the demo fleet; persisted records win so activation
  // counters survive restarts.
  for (std::uint64_t id = 1; id <= o.devices; ++id) {
    if (owned.find(id)) continue;
    coma::DevicePair pair = coma::make_device_pair(cfg, id, seed);
    coma::EnrollmentRecord rec = coma::enroll(pair.trusted, pair.device);
    coma::DeviceRecord dr;
    dr.device_id = rec.device_id;
    dr.challenge_base = rec.challenge_base;
    dr.sk = rec.sk;
    dr.ok = pair.trusted.obfuscation_key();
    owned.put(dr);
  }

  coma::ActivationServer server(owned, cfg, seed ^ 0x5345525645ull);
  server.start(o.port);
  std::cout << json{{"listening", server.port()}, {"devices", owned.size()}}.dump()
            << std::endl;  // flush so a pipe reader sees the port immediately

  std::signal(SIGINT, handle_sigint);
  std::signal(SIGTERM, handle_sigint);
  while (!g_stop.load()) {
    if (o.sessions != 0 && server.sessions().size() >= o.sessions) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  server.stop();

  std::ostringstream lines;
  for (const coma::SessionLog& s : server.sessions()) {
    json j{{"device_id", s.device_id},
           {"success", s.success},
           {"trn", s.trn_hex},
           {"cycles", s.cycles}};
    if (!s.error.empty()) j["error"] = s.error;
    lines << j.dump() << '\n';
  }
  emit(lines.str(), o.log);
  return 0;
}

struct DeviceOpts {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::uint64_t id = 1;
  std::string profile = "coma2";
  std::uint64_t timeout_ms = 10000;
};

int cmd_device(std::uint64_t seed, const DeviceOpts& o) {
  if (o.port == 0) throw coma::ConfigError("--port is required (or set COMA_PORT)");
  coma::ProtocolConfig cfg = coma::ProtocolConfig::for_profile(o.profile);
  coma::DevicePair pair = coma::make_device_pair(cfg, o.id, seed);
  coma::enroll(pair.trusted, pair.device);

  try {
    coma::UnlockResult res =
        coma::device_run(pair.device, o.host, o.port, static_cast<int>(o.timeout_ms));
    std::cout << json{{"device_id", o.id},
                      {"success", res.success},
                      {"cycles", res.cycles_spent},
                      {"trn", pair.device.activation_trn().to_hex()}}
                     .dump()
              << std::endl;
    return 0;
  } catch (const coma::Error& e) {
    std::cout << json{{"device_id", o.id}, {"success", false}, {"error", error_json(e)}}.dump()
              << std::endl;
    return static_cast<int>(e.code);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coma: activation, attack, cost and health toolbench"};
  app.require_subcommand(1);

  std::uint64_t seed = default_seed;
  app.add_option("--seed", seed, "PRNG seed; fixed seed gives byte-identical output")
      ->capture_default_str();

  ActivateOpts act;
  CLI::App* activate = app.add_subcommand("activate", "run one local activation session");
  activate->add_option("--profile", act.profile, "cost profile (coma1|coma2)")
      ->capture_default_str();
  activate->add_option("--n", act.n, "override block width");
  activate->add_option("--update-period", act.u, "override TRN update period U");
  activate->add_option("--device-id", act.device_id, "device identity")->capture_default_str();
  activate->add_option("--out", act.out, "write JSON transcript here (default stdout)");
  activate->add_option("--tamper", act.tamper, "flip one bit in flight: frame:K[:BIT]");
  activate->add_option("--replay", act.replay, "re-apply the DAL from this transcript");

  AttackOpts atk;
  CLI::App* attack = app.add_subcommand("attack", "run key-extraction attacks");
  attack->add_option("--kind", atk.kind, "sat or affine")->capture_default_str();
  attack->add_option("--sizes", atk.sizes, "network widths for the SAT sweep")
      ->delimiter(',')
      ->capture_default_str();
  attack->add_option("--kinds", atk.kinds, "network kinds (blk,nonblk)")
      ->delimiter(',')
      ->capture_default_str();
  attack->add_option("--n", atk.n, "width for the affine demo")->capture_default_str();
  attack->add_option("--blocks", atk.blocks, "fresh blocks to verify in the affine demo")
      ->capture_default_str();
  attack->add_option("--timeout-ms", atk.timeout_ms, "per-instance SAT timeout")
      ->capture_default_str();
  attack->add_flag("--zero-time", atk.zero_time, "write 0.000 in the seconds column");
  attack->add_option("--out", atk.out, "write CSV here (default stdout)");

  CostOpts cost;
  CLI::App* costc = app.add_subcommand("cost", "regenerate latency/energy sweeps");
  costc->add_option("--profiles", cost.profiles, "profiles to sweep")
      ->delimiter(',')
      ->capture_default_str();
  costc->add_option("--modes", cost.modes, "modes to include (dcc,lcc)")
      ->delimiter(',')
      ->capture_default_str();
  costc->add_option("--min-bytes", cost.min_bytes, "sweep start")->capture_default_str();
  costc->add_option("--max-bytes", cost.max_bytes, "sweep end")->capture_default_str();
  costc->add_option("--out", cost.out, "write CSV here (default stdout)");

  HealthOpts health;
  CLI::App* healthc = app.add_subcommand("health", "run entropy and PUF health suites");
  healthc->add_option("--inject", health.inject, "fault: none|biased|stuck0|stuck1")
      ->capture_default_str();
  healthc->add_option("--bias", health.bias, "P[bit=1] for --inject biased")
      ->capture_default_str();
  healthc->add_option("--bits", health.bits, "raw bits to feed the monitors")
      ->capture_default_str();
  healthc->add_option("--puf", health.puf, "device under test: arbiter|pseudo")
      ->capture_default_str();
  healthc->add_option("--out", health.out, "write JSON report here (default stdout)");

  ServeOpts srv;
  CLI::App* serve = app.add_subcommand("serve", "run the remote activation server");
  serve->add_option("--port", srv.port, "listen port; 0 picks one")
      ->envname("COMA_PORT")
      ->capture_default_str();
  serve->add_option("--registry", srv.registry, "persist the device registry here")
      ->envname("COMA_REGISTRY");
  serve->add_option("--devices", srv.devices, "pre-enroll fabricated devices 1..K")
      ->capture_default_str();
  serve->add_option("--sessions", srv.sessions, "exit after N sessions (0 = until SIGINT)")
      ->capture_default_str();
  serve->add_option("--profile", srv.profile, "cost profile")->capture_default_str();
  serve->add_option("--log", srv.log, "write session log JSONL here (default stdout)");

  DeviceOpts dev;
  CLI::App* device = app.add_subcommand("device", "activate one device against a server");
  device->add_option("--host", dev.host, "server host")->capture_default_str();
  device->add_option("--port", dev.port, "server port")->envname("COMA_PORT");
  device->add_option("--id", dev.id, "device identity")->capture_default_str();
  device->add_option("--profile", dev.profile, "cost profile")->capture_default_str();
  device->add_option("--timeout-ms", dev.timeout_ms, "receive timeout")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(coma::ExitCode::config);
  }

  try {
    if (*activate) return cmd_activate(seed, act);
    if (*attack) return cmd_attack(seed, atk);
    if (*costc) return cmd_cost(cost);
    if (*healthc) return cmd_health(seed, health);
    if (*serve) return cmd_serve(seed, srv);
    if (*device) return cmd_device(seed, dev);
  } catch (const coma::Error& e) {
    std::cerr << json{{"error", error_json(e)}}.dump() << std::endl;
    return static_cast<int>(e.code);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", "Unexpected"}, {"message", e.what()}}}}.dump()
              << std::endl;
    return 1;
  }
  return 0;
}
