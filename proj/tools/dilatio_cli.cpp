// Command-line front end: channels, metrics, stencils, rigidity and
// self-testing over JSON files.
//
// Exit codes: 0 success / true verdict, 1 false or infeasible verdict,
// 2 usage error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "dilatio/derivation.hpp"
#include "dilatio/fixtures.hpp"
#include "dilatio/json_io.hpp"
#include "dilatio/metrics.hpp"
#include "dilatio/rigidity.hpp"
#include "dilatio/selftest.hpp"

using namespace dilatio;

namespace {

struct Emitter {
  std::string out_path;
  std::uint64_t seed = 0;
  bool seeded = false;

  int emit(Json j, int code) const {
    if (seeded) j["seed"] = seed;
    const std::string text = j.dump(1) + "\n";
    std::cout << text;
    if (!out_path.empty()) {
      std::ofstream f(out_path);
      f << text;
    }
    return code;
  }
};

double default_tol() {
  if (const char* env = std::getenv("DILATIO_TOL")) {
    try {
      double t = std::stod(env);
      if (t > 0) return t;
    } catch (...) {
    }
  }
  return 1e-6;
}

CMatrix isometry_of(const Channel& c) {
  auto sd = stinespring_minimal(to_quantum(c));
  if (sd.env_dim != 1)
    throw std::invalid_argument("channel is not isometric (Choi rank > 1)");
  return sd.isometry;
}

Reduction reduction_from_json(const Json& j) {
  Reduction r;
  r.wa = cmatrix_from_json(j.at("wa"));
  r.wb = cmatrix_from_json(j.at("wb"));
  r.res_a = j.at("resA").get<int>();
  r.res_b = j.at("resB").get<int>();
  r.pdim = j.at("pdim").get<int>();
  r.residual_state = cmatrix_from_json(j.at("residualState")).col(0);
  r.purification = cmatrix_from_json(j.at("purification")).col(0);
  return r;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-dimensional channels, dilations and causal structure"};
  app.require_subcommand(1);

  Emitter em;
  double tol = default_tol();
  app.add_option("--seed", em.seed, "random seed (echoed in the output)")
      ->each([&](const std::string&) { em.seeded = true; });
  app.add_option("--tol", tol, "numerical tolerance");
  app.add_option("--out", em.out_path, "also write the JSON result to this file");
  std::string format = "json";
  app.add_option("--format", format, "output format (json)")->check(CLI::IsMember({"json"}));

  std::vector<std::string> inputs;
  std::string fixture, filling_path, canon_path, witness_a, witness_b, reduction_path;
  std::string decomposition_path, fixture_name, out_dir = ".";
  std::vector<std::string> pairs;
  bool bipartite = false, canonical = false, search = false;

  auto* channel_cmd = app.add_subcommand("channel", "channel-level operations");
  auto* validate_cmd = channel_cmd->add_subcommand("validate", "CPTP / stochasticity diagnostics");
  validate_cmd->add_option("--in", inputs, "channel file")->required();
  channel_cmd->require_subcommand(1);

  auto* metric_cmd = app.add_subcommand("metric", "distances between channels");
  CLI::App* metric_verbs[5];
  const char* metric_names[5] = {"d1", "diamond", "iso", "pdiamond", "bp"};
  for (int k = 0; k < 5; ++k) {
    metric_verbs[k] = metric_cmd->add_subcommand(metric_names[k]);
    metric_verbs[k]->add_option("--in", inputs, "channel file (twice)");
  }
  metric_cmd->require_subcommand(1);

  auto* stencil_cmd = app.add_subcommand("stencil", "circuit DAG evaluation");
  auto* eval_cmd = stencil_cmd->add_subcommand("eval", "evaluate a filled stencil");
  auto* contract_cmd = stencil_cmd->add_subcommand("contract", "contract port pairs");
  auto* spec_cmd = stencil_cmd->add_subcommand("spec", "ancestry causal specification");
  for (auto* c : {eval_cmd, contract_cmd, spec_cmd}) {
    c->add_option("--in", inputs, "stencil file")->required();
    c->add_option("--filling", filling_path, "filling file (box id -> channel file)")->required();
  }
  contract_cmd->add_option("--pair", pairs, "outputPort=inputPort (repeatable)")->required();
  stencil_cmd->require_subcommand(1);

  auto* rig_cmd = app.add_subcommand("rigidity", "classical Bell-channel rigidity");
  auto* analyze_cmd = rig_cmd->add_subcommand("analyze", "decompositions and verdict");
  analyze_cmd->add_option("--in", inputs, "channel file");
  analyze_cmd->add_option("--fixture", fixture, "named fixture instead of a file");
  analyze_cmd->add_flag("--bipartite", bipartite, "product-atom analysis");
  rig_cmd->require_subcommand(1);

  auto* st_cmd = app.add_subcommand("selftest", "quantum strategies and self-testing");
  auto* beh_cmd = st_cmd->add_subcommand("behaviour", "Born-rule behaviour of a strategy");
  auto* chsh_cmd = st_cmd->add_subcommand("chsh", "CHSH value of a strategy");
  auto* nai_cmd = st_cmd->add_subcommand("naimark", "projectivise a POVM strategy");
  auto* red_cmd = st_cmd->add_subcommand("reduce", "verify a reduction");
  auto* der_cmd = st_cmd->add_subcommand("derive", "local derivability (bridge identity)");
  auto* sec_cmd = st_cmd->add_subcommand("security", "acausal decomposition diagnostics");
  for (auto* c : {beh_cmd, chsh_cmd, nai_cmd, red_cmd, der_cmd})
    c->add_option("--in", inputs, "strategy file");
  chsh_cmd->add_flag("--canonical", canonical, "use the canonical CHSH strategy");
  red_cmd->add_option("--canon", canon_path, "canonical strategy file");
  red_cmd->add_option("--reduction", reduction_path, "reduction file");
  der_cmd->add_option("--canon", canon_path, "canonical strategy file");
  der_cmd->add_option("--witness-a", witness_a, "site-A witness channel file");
  der_cmd->add_option("--witness-b", witness_b, "site-B witness channel file");
  der_cmd->add_flag("--search", search, "alternating witness search");
  sec_cmd->add_option("--in", inputs, "behaviour file");
  sec_cmd->add_option("--decomposition", decomposition_path,
                      "file with {\"weights\": [...], \"parts\": [behaviour...]}");
  st_cmd->require_subcommand(1);

  auto* fx_cmd = app.add_subcommand("fixtures", "named example files");
  auto* emit_cmd = fx_cmd->add_subcommand("emit", "write a fixture bundle");
  emit_cmd->add_option("--name", fixture_name, "fixture name")->required();
  emit_cmd->add_option("--out", out_dir, "output directory");
  auto* list_cmd = fx_cmd->add_subcommand("list", "list fixture names");
  fx_cmd->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (validate_cmd->parsed()) {
      Channel c = channel_from_json(load_json(inputs.at(0)));
      auto d = validate(c, std::min(tol, 1e-9));
      Json j{{"pass", d.pass},
             {"psdMargin", d.psd_margin},
             {"tpResidual", d.tp_residual},
             {"stochasticResidual", d.stoch_residual}};
      return em.emit(j, d.pass ? 0 : 1);
    }

    if (metric_cmd->parsed()) {
      if (inputs.size() != 2) throw std::invalid_argument("metric: need exactly two --in files");
      Channel a = channel_from_json(load_json(inputs[0]));
      Channel b = channel_from_json(load_json(inputs[1]));
      if (metric_verbs[0]->parsed()) {
        double v = is_classical(a) && is_classical(b)
                       ? trace_distance(std::get<ClassicalChannel>(a), std::get<ClassicalChannel>(b))
                       : trace_distance(a, b);
        return em.emit(Json{{"value", v}}, 0);
      }
      if (metric_verbs[1]->parsed()) {
        auto r = diamond_distance(to_quantum(a), to_quantum(b), tol);
        Json j{{"value", r.value},
               {"certificates",
                Json{{"sdpGap", r.sdp_gap},
                     {"seesawLower", r.seesaw_lower},
                     {"blockPsdMargin", r.certificate_margin},
                     {"dualObjective", r.certificate_objective}}}};
        return em.emit(j, 0);
      }
      if (metric_verbs[2]->parsed()) {
        auto f = iso_fidelities(isometry_of(a), isometry_of(b));
        Json j{{"F", f.f}, {"FF", f.ff}, {"dDiamond", f.d_diamond}, {"dInf", f.d_inf}};
        return em.emit(j, 0);
      }
      if (metric_verbs[3]->parsed()) {
        auto iv = pdiamond_interval(to_quantum(a), to_quantum(b), tol);
        Json j{{"interval", Json::array({iv.lower, iv.upper})},
               {"lowerMethod", iv.lower_method},
               {"upperMethod", iv.upper_method}};
        return em.emit(j, 0);
      }
      auto r = bp_check(isometry_of(a), isometry_of(b));
      return em.emit(Json{{"beta", r.beta}, {"P", r.p}, {"residual", r.residual}}, 0);
    }

    if (stencil_cmd->parsed()) {
      auto [g, f] = stencil_from_json(load_json(inputs.at(0)));
      std::string dir = std::filesystem::path(filling_path).parent_path().string();
      filling_from_json(load_json(filling_path), f, dir);
      if (spec_cmd->parsed()) {
        CausalChannel v = evaluate_stencil(g, f);
        return em.emit(Json{{"spec", to_json(v.spec)}}, 0);
      }
      if (eval_cmd->parsed()) {
        CausalChannel v = evaluate_stencil(g, f);
        return em.emit(Json{{"channel", to_json(v.channel)}, {"spec", to_json(v.spec)}}, 0);
      }
      std::vector<std::pair<std::string, std::string>> contraction;
      for (const auto& p : pairs) {
        auto pos = p.find('=');
        if (pos == std::string::npos)
          throw std::invalid_argument("contract: --pair must be outputPort=inputPort");
        contraction.emplace_back(p.substr(0, pos), p.substr(pos + 1));
      }
      try {
        auto r = contract(g, f, contraction);
        return em.emit(Json{{"channel", to_json(r.value.channel)},
                            {"spec", to_json(r.value.spec)},
                            {"stencil", to_json(r.stencil, r.filling)}},
                       0);
      } catch (const std::invalid_argument& e) {
        return em.emit(Json{{"contractible", false}, {"reason", e.what()}}, 1);
      }
    }

    if (rig_cmd->parsed()) {
      Channel c = fixture.empty()
                      ? channel_from_json(load_json(inputs.at(0)))
                      : [&]() -> Channel {
                          if (fixture == "bit-refresh") return Channel(fixtures::bit_refresh());
                          if (fixture == "pr-box") return Channel(fixtures::pr_box());
                          throw std::invalid_argument("rigidity: unknown fixture " + fixture);
                        }();
      if (!is_classical(c)) throw std::invalid_argument("rigidity: classical channel required");
      const auto& cc = std::get<ClassicalChannel>(c);
      if (bipartite || cc.input().size() == 2) {
        Behaviour b = Behaviour::from_channel(cc);
        auto d = bipartite_product_decompose(cc, b.sc);
        Json j{{"feasible", d.feasible}, {"rigid", d.feasible && d.unique}};
        if (d.feasible) j["unique"] = d.unique;
        return em.emit(j, (d.feasible && d.unique) ? 0 : 1);
      }
      auto v = unipartite_rigid(cc);
      Json decs = Json::array();
      for (const auto& d : v.extreme) {
        Json atoms = Json::array();
        for (size_t k = 0; k < d.atoms.size(); ++k)
          atoms.push_back(Json{{"values", d.atoms[k].values},
                               {"weight", d.weights(static_cast<Eigen::Index>(k))}});
        decs.push_back(atoms);
      }
      Json j{{"rigid", v.rigid}, {"decompositions", decs.size()}, {"extreme", decs}};
      return em.emit(j, v.rigid ? 0 : 1);
    }

    if (st_cmd->parsed()) {
      if (chsh_cmd->parsed()) {
        Strategy s = canonical ? canonical_chsh() : strategy_from_json(load_json(inputs.at(0)));
        return em.emit(Json{{"value", classical_chsh(behaviour_of(s))}}, 0);
      }
      if (beh_cmd->parsed()) {
        Strategy s = strategy_from_json(load_json(inputs.at(0)));
        return em.emit(to_json(behaviour_of(s)), 0);
      }
      if (nai_cmd->parsed()) {
        Strategy s = strategy_from_json(load_json(inputs.at(0)));
        return em.emit(to_json(naimarkize(s)), 0);
      }
      if (red_cmd->parsed()) {
        Strategy s = strategy_from_json(load_json(inputs.at(0)));
        Strategy canon = strategy_from_json(load_json(canon_path));
        Reduction r = reduction_from_json(load_json(reduction_path));
        auto chk = verify_reduction(s, canon, r, tol);
        return em.emit(Json{{"ok", chk.ok}, {"residual", chk.residual}}, chk.ok ? 0 : 1);
      }
      if (der_cmd->parsed()) {
        Strategy s = strategy_from_json(load_json(inputs.at(0)));
        Strategy canon = strategy_from_json(load_json(canon_path));
        std::optional<std::pair<Channel, Channel>> witnesses;
        if (!witness_a.empty() && !witness_b.empty())
          witnesses = std::make_pair(channel_from_json(load_json(witness_a)),
                                     channel_from_json(load_json(witness_b)));
        else if (!search)
          throw std::invalid_argument("derive: give --witness-a/--witness-b or --search");
        auto r = local_derivation(s, canon, witnesses, tol);
        const char* verdict = r.status == DerivationStatus::verified  ? "verified"
                              : r.status == DerivationStatus::refuted ? "refuted"
                                                                      : "inconclusive";
        return em.emit(Json{{"status", verdict}, {"residual", r.residual}},
                       r.status == DerivationStatus::verified ? 0 : 1);
      }
      Behaviour b = behaviour_from_json(load_json(inputs.at(0)));
      Json dj = load_json(decomposition_path);
      RVector w(static_cast<Eigen::Index>(dj.at("weights").size()));
      for (Eigen::Index k = 0; k < w.size(); ++k)
        w(k) = dj.at("weights").at(static_cast<size_t>(k)).get<double>();
      std::vector<Behaviour> parts;
      for (const auto& p : dj.at("parts")) parts.push_back(behaviour_from_json(p));
      auto r = security_extremality(b, w, parts, tol);
      Json j{{"decompositionTrivial", r.decomposition_trivial}, {"nsVertex", r.ns_vertex}};
      if (r.witness_index) j["witnessIndex"] = *r.witness_index;
      return em.emit(j, r.decomposition_trivial ? 0 : 1);
    }

    if (fx_cmd->parsed()) {
      if (list_cmd->parsed()) return em.emit(Json{{"fixtures", fixtures::names()}}, 0);
      auto files = fixtures::bundle(fixture_name);
      std::filesystem::create_directories(out_dir);
      Json written = Json::array();
      for (const auto& [fname, payload] : files) {
        save_json(out_dir + "/" + fname, payload);
        written.push_back(fname);
      }
      return em.emit(Json{{"written", written}, {"dir", out_dir}}, 0);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
