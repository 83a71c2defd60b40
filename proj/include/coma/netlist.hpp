#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coma/bitvec.hpp"
#include "coma/switchnet.hpp"

namespace coma {

// Combinational gate-level netlist over named signals. Gates are kept in
// topological order so evaluation is a single pass.
//
// Text form, one record per line:
//   width <n> kind <blk|nonblk>
//   input <name>
//   key <name>
//   mux <out> <sel> <a> <b>     out = sel ? b : a
//   xor <out> <a> <b>
//   buf <out> <a>
//   output <name> <signal>
// '#' starts a comment.
class Netlist {
public:
  enum class GateType { mux, xor_gate, buf };

  struct Gate {
    GateType type;
    std::uint32_t out;
    std::uint32_t in0 = 0, in1 = 0, in2 = 0;  // mux: sel,a,b
  };

  std::uint32_t width = 0;
  NetworkKind kind = NetworkKind::omega;
  std::vector<std::uint32_t> inputs;   // signal ids, input i carries data bit i
  std::vector<std::uint32_t> keys;     // signal ids, key j carries trn bit j
  std::vector<std::uint32_t> outputs;  // signal ids, output i is data bit i
  std::vector<Gate> gates;
  std::uint32_t signal_count = 0;

  std::uint32_t new_signal() { return signal_count++; }

  // Evaluate with data word x and key bits; the contract with csn_forward is
  // eval(to_netlist(t), trn, x) == csn_forward(t, trn, x).
  BitVec eval(const BitVec& x, const BitVec& key) const {
    if (x.size() != inputs.size()) throw std::invalid_argument("Netlist::eval: input width");
    if (key.size() != keys.size()) throw std::invalid_argument("Netlist::eval: key width");
    std::vector<std::uint8_t> val(signal_count, 0);
    for (std::size_t i = 0; i < inputs.size(); ++i) val[inputs[i]] = x.get(i);
    for (std::size_t i = 0; i < keys.size(); ++i) val[keys[i]] = key.get(i);
    for (const auto& g : gates) {
      switch (g.type) {
        case GateType::mux: val[g.out] = val[g.in0] ? val[g.in2] : val[g.in1]; break;
        case GateType::xor_gate: val[g.out] = val[g.in0] ^ val[g.in1]; break;
        case GateType::buf: val[g.out] = val[g.in0]; break;
      }
    }
    BitVec y(outputs.size());
    for (std::size_t i = 0; i < outputs.size(); ++i) y.set(i, val[outputs[i]]);
    return y;
  }

  void serialize(std::ostream& os) const {
    os << "width " << width << " kind " << to_string(kind) << "\n";
    for (std::size_t i = 0; i < inputs.size(); ++i) os << "input x" << i << "\n";
    for (std::size_t i = 0; i < keys.size(); ++i) os << "key k" << i << "\n";
    for (const auto& g : gates) {
      switch (g.type) {
        case GateType::mux:
          os << "mux s" << g.out << " " << name_of(g.in0) << " " << name_of(g.in1) << " "
             << name_of(g.in2) << "\n";
          break;
        case GateType::xor_gate:
          os << "xor s" << g.out << " " << name_of(g.in0) << " " << name_of(g.in1) << "\n";
          break;
        case GateType::buf:
          os << "buf s" << g.out << " " << name_of(g.in0) << "\n";
          break;
      }
    }
    for (std::size_t i = 0; i < outputs.size(); ++i)
      os << "output y" << i << " " << name_of(outputs[i]) << "\n";
  }

  std::string to_text() const {
    std::ostringstream os;
    serialize(os);
    return os.str();
  }

  static Netlist parse(std::istream& is) {
    Netlist nl;
    std::map<std::string, std::uint32_t> sig;
    auto lookup = [&](const std::string& name) -> std::uint32_t {
      auto it = sig.find(name);
      if (it == sig.end()) throw std::invalid_argument("Netlist::parse: unknown signal " + name);
      return it->second;
    };
    std::string line;
    while (std::getline(is, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      std::istringstream ls(line);
      std::string tok;
      if (!(ls >> tok)) continue;
      if (tok == "width") {
        std::string kw, kindname;
        if (!(ls >> nl.width >> kw >> kindname) || kw != "kind")
          throw std::invalid_argument("Netlist::parse: bad width line");
        nl.kind = kindname == "blk" ? NetworkKind::omega : NetworkKind::log_extra_stage;
      } else if (tok == "input") {
        std::string name;
        ls >> name;
        std::uint32_t s = nl.new_signal();
        sig[name] = s;
        nl.inputs.push_back(s);
      } else if (tok == "key") {
        std::string name;
        ls >> name;
        std::uint32_t s = nl.new_signal();
        sig[name] = s;
        nl.keys.push_back(s);
      } else if (tok == "mux" || tok == "xor" || tok == "buf") {
        std::string out, a, b, c;
        ls >> out >> a;
        Gate g{};
        g.out = nl.new_signal();
        sig[out] = g.out;
        if (tok == "mux") {
          ls >> b >> c;
          g.type = GateType::mux;
          g.in0 = lookup(a);
          g.in1 = lookup(b);
          g.in2 = lookup(c);
        } else if (tok == "xor") {
          ls >> b;
          g.type = GateType::xor_gate;
          g.in0 = lookup(a);
          g.in1 = lookup(b);
        } else {
          g.type = GateType::buf;
          g.in0 = lookup(a);
        }
        nl.gates.push_back(g);
      } else if (tok == "output") {
        std::string name, src;
        ls >> name >> src;
        nl.outputs.push_back(lookup(src));
      } else {
        throw std::invalid_argument("Netlist::parse: unknown record " + tok);
      }
    }
    if (nl.width != nl.inputs.size()) throw std::invalid_argument("Netlist::parse: width mismatch");
    return nl;
  }

  static Netlist parse_text(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

private:
  // Serialization names signals by role; gate outputs use the raw id.
  std::string name_of(std::uint32_t s) const {
    for (std::size_t i = 0; i < inputs.size(); ++i)
      if (inputs[i] == s) return "x" + std::to_string(i);
    for (std::size_t i = 0; i < keys.size(); ++i)
      if (keys[i] == s) return "k" + std::to_string(i);
    return "s" + std::to_string(s);
  }
};

// Export a switching network as a gate-level netlist: per RRB two MUXes
// (selected by the swap key bit) and two XORs (inversion key bits). Key
// inputs follow the TRN bit order.
inline Netlist to_netlist(const NetworkTopology& t) {
  Netlist nl;
  std::uint32_t n = t.width();
  nl.width = n;
  nl.kind = t.kind();
  for (std::uint32_t i = 0; i < n; ++i) nl.inputs.push_back(nl.new_signal());
  for (std::size_t i = 0; i < t.config_bits(); ++i) nl.keys.push_back(nl.new_signal());
  std::vector<std::uint32_t> line(nl.inputs);
  std::vector<std::uint32_t> next(n);
  for (std::size_t s = 0; s < t.stage_count(); ++s) {
    const auto& wiring = t.stages()[s].wiring;
    for (std::uint32_t m = 0; m < n / 2; ++m) {
      std::size_t kbase = 3 * (s * (n / 2) + m);
      std::uint32_t k_swap = nl.keys[kbase];
      std::uint32_t k_inv0 = nl.keys[kbase + 1];
      std::uint32_t k_inv1 = nl.keys[kbase + 2];
      std::uint32_t a = line[wiring[2 * m]];
      std::uint32_t b = line[wiring[2 * m + 1]];
      std::uint32_t m0 = nl.new_signal();
      nl.gates.push_back({Netlist::GateType::mux, m0, k_swap, a, b});
      std::uint32_t m1 = nl.new_signal();
      nl.gates.push_back({Netlist::GateType::mux, m1, k_swap, b, a});
      std::uint32_t o0 = nl.new_signal();
      nl.gates.push_back({Netlist::GateType::xor_gate, o0, m0, k_inv0});
      std::uint32_t o1 = nl.new_signal();
      nl.gates.push_back({Netlist::GateType::xor_gate, o1, m1, k_inv1});
      next[2 * m] = o0;
      next[2 * m + 1] = o1;
    }
    line = next;
  }
  nl.outputs.resize(n);
  for (std::uint32_t p = 0; p < n; ++p) nl.outputs[p] = line[t.output_map()[p]];
  return nl;
}

}  // namespace coma
