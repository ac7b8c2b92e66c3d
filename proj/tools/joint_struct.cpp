// joint-struct: command-line front end for the joint pose / garment
// attribute engine. Subcommands cover model and dataset validation,
// synthetic data generation, training, inference, evaluation, parameter
// grid search, ablations, and brute-force oracle checks.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "jointstruct/jointstruct.hpp"

namespace js = jointstruct;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;

std::uint64_t env_seed_override(std::uint64_t seed) {
  if (const char* env = std::getenv("JOINT_STRUCT_SEED")) return std::strtoull(env, nullptr, 10);
  return seed;
}

js::TrainConfig load_train_config(const std::string& path, std::uint64_t default_seed) {
  js::TrainConfig cfg;
  cfg.seed = default_seed;
  if (path.empty()) return cfg;
  std::ifstream f(path);
  if (!f) js::fail(js::ErrorCode::IoError, "cannot open: " + path);
  js::ordered_json j;
  f >> j;
  if (j.contains("C")) cfg.C = j.at("C").get<double>();
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  if (j.contains("eta0")) cfg.eta0 = j.at("eta0").get<double>();
  if (j.contains("eta_decay")) cfg.eta_decay = j.at("eta_decay").get<double>();
  if (j.contains("negatives_per_instance"))
    cfg.negatives_per_instance = j.at("negatives_per_instance").get<int>();
  if (j.contains("hard_negative_rounds"))
    cfg.hard_negative_rounds = j.at("hard_negative_rounds").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

void write_json(const std::string& path, const js::ordered_json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) js::fail(js::ErrorCode::IoError, "cannot open for writing: " + path);
  f << j.dump(2) << "\n";
}

js::ordered_json read_json(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) js::fail(js::ErrorCode::IoError, "cannot open: " + path);
  js::ordered_json j;
  f >> j;
  return j;
}

js::ordered_json results_to_json(const js::ModelSpec& spec,
                                 const std::vector<js::Instance>& data,
                                 const std::vector<js::InferenceResult>& results, double alpha,
                                 double beta, int max_iter) {
  js::ordered_json j;
  j["format"] = "jointstruct-results";
  j["version"] = 1;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(js::model_hash(spec)));
  j["model_hash"] = hex;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["max_iter"] = max_iter;
  js::ordered_json arr = js::ordered_json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    js::ordered_json r;
    r["id"] = data[i].id;
    r["pose"] = results[i].label.pose;
    r["attributes"] = results[i].label.attrs;
    r["score"] = results[i].score;
    r["iterations"] = results[i].iterations;
    r["converged"] = results[i].converged;
    js::ordered_json trace = js::ordered_json::array();
    for (const auto& [t, s] : results[i].trace) trace.push_back({t, s});
    r["trace"] = std::move(trace);
    arr.push_back(std::move(r));
  }
  j["results"] = std::move(arr);
  return j;
}

std::vector<js::InferenceResult> run_inference(const js::WeightVector& w,
                                               const std::vector<js::Instance>& data,
                                               const js::ModelSpec& spec, const js::InferOptions& opt,
                                               int workers) {
  std::vector<js::InferenceResult> results(data.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < data.size(); ++i) results[i] = js::infer_joint(w, data[i], spec, opt);
    return results;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (data.size() + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(data.size(), lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) results[i] = js::infer_joint(w, data[i], spec, opt);
    });
  }
  for (auto& th : pool) th.join();
  return results;
}

js::EvalReport evaluate_predictions(const std::vector<js::Instance>& data, const js::ModelSpec& spec,
                                    const std::vector<js::JointLabel>& labels, double threshold) {
  std::vector<js::InstanceEval> evals;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].ground_truth) continue;
    evals.push_back(js::evaluate_instance(data[i], spec, labels[i], threshold));
  }
  return js::aggregate(evals, spec);
}

struct GridCell {
  double alpha, beta;
  double pcp, gap;
};

// 3-fold cross-validation over the alpha x beta grid; cells are ranked by
// total PCP with total GAP as the tie-break.
GridCell grid_search(const std::vector<js::Instance>& data, const js::ModelSpec& spec,
                     const js::TrainConfig& cfg, const std::vector<double>& alphas,
                     const std::vector<double>& betas, std::vector<GridCell>& cells, int& runs) {
  runs = 0;
  for (double a : alphas)
    for (double b : betas) {
      long pcp_correct = 0, pcp_count = 0, gap_correct = 0, gap_count = 0;
      for (int fold = 0; fold < 3; ++fold) {
        std::vector<js::Instance> tr, va;
        for (std::size_t i = 0; i < data.size(); ++i)
          (static_cast<int>(i % 3) == fold ? va : tr).push_back(data[i]);
        if (tr.empty() || va.empty()) continue;
        const auto trained = js::train(tr, spec, cfg, a, b);
        ++runs;
        js::InferOptions opt;
        opt.alpha = a;
        opt.beta = b;
        std::vector<js::InstanceEval> evals;
        for (const auto& inst : va) {
          if (!inst.ground_truth) continue;
          const auto res = js::infer_joint(trained.w, inst, spec, opt);
          evals.push_back(js::evaluate_instance(inst, spec, res.label));
        }
        if (evals.empty()) continue;
        const auto rep = js::aggregate(evals, spec);
        pcp_correct += rep.pose_total.correct;
        pcp_count += rep.pose_total.count;
        gap_correct += rep.attr_total.correct;
        gap_count += rep.attr_total.evaluated;
      }
      cells.push_back({a, b, pcp_count ? double(pcp_correct) / pcp_count : 0.0,
                       gap_count ? double(gap_correct) / gap_count : 0.0});
    }
  GridCell best = cells.front();
  for (const auto& c : cells)
    if (c.pcp > best.pcp + 1e-12 || (std::abs(c.pcp - best.pcp) <= 1e-12 && c.gap > best.gap + 1e-12))
      best = c;
  return best;
}

int cmd_oracle_check(int instances, std::uint64_t seed, std::uint64_t cap) {
  js::ModelSpec spec = js::build_default_model(6, 4, {}, {2, 3, 2, 3, 2});
  js::SynthConfig scfg;
  scfg.train_count = instances;
  scfg.test_count = 0;
  scfg.k_per_part = 3;
  scfg.sigma = 0.4;
  scfg.rho = 0.8;
  scfg.edge_fidelity = 0.8;
  scfg.seed = seed;
  const auto data = js::generate(scfg, spec);

  int pose_pass = 0, attr_pass = 0, joint_pass = 0, dense_pass = 0;
  js::Rng rng(js::Rng::mix(seed, 0x0facadeULL));
  for (int t = 0; t < instances; ++t) {
    const auto& inst = data.train[t];
    js::WeightVector w = js::WeightVector::zeros(spec);
    for (auto& v : w.values) v = rng.normal();
    const double alpha = 0.3, beta = -0.4;

    std::vector<int> c(spec.attrs.attribute_count);
    for (int k = 0; k < spec.attrs.attribute_count; ++k)
      c[k] = rng.uniform_int(1, spec.attrs.cardinalities[k]);
    const auto pr = js::infer_pose_given_attrs(w, inst, spec, c, alpha, beta);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> p(spec.parts.part_count, 1);
    for (;;) {
      best = std::max(best, js::score_full(w, inst, spec, {p, c}, alpha, beta));
      int i = spec.parts.part_count - 1;
      while (i >= 0 && ++p[i] > inst.candidate_count(i)) p[i--] = 1;
      if (i < 0) break;
    }
    const double got = js::score_full(w, inst, spec, {pr.assignment, c}, alpha, beta);
    if (std::abs(got - best) <= 1e-9 * std::max(1.0, std::abs(best))) ++pose_pass;

    std::vector<int> fixed_pose(spec.parts.part_count);
    for (int i = 0; i < spec.parts.part_count; ++i) fixed_pose[i] = rng.uniform_int(1, inst.candidate_count(i));
    const auto ar = js::infer_attrs_given_pose(w, inst, spec, fixed_pose);
    best = -std::numeric_limits<double>::infinity();
    std::vector<int> cc(spec.attrs.attribute_count, 1);
    for (;;) {
      best = std::max(best, js::score_full(w, inst, spec, {fixed_pose, cc}, alpha, beta));
      int k = spec.attrs.attribute_count - 1;
      while (k >= 0 && ++cc[k] > spec.attrs.cardinalities[k]) cc[k--] = 1;
      if (k < 0) break;
    }
    const double got_a = js::score_full(w, inst, spec, {fixed_pose, ar.assignment}, alpha, beta);
    if (std::abs(got_a - best) <= 1e-9 * std::max(1.0, std::abs(best))) ++attr_pass;

    js::InferOptions opt;
    opt.alpha = alpha;
    opt.beta = beta;
    const auto res = js::infer_joint(w, inst, spec, opt);
    const auto bf = js::brute_force_joint(w, inst, spec, alpha, beta, cap);
    bool ok = res.score <= bf.score + 1e-9 * std::max(1.0, std::abs(bf.score));
    for (std::size_t i = 1; i < res.trace.size(); ++i)
      if (res.trace[i].second < res.trace[i - 1].second - 1e-9) ok = false;
    if (std::abs(res.score - js::score_full(w, inst, spec, res.label, alpha, beta)) >
        1e-9 * std::max(1.0, std::abs(res.score)))
      ok = false;
    if (ok) ++joint_pass;

    const js::JointLabel y = bf.label;
    const auto dense = js::assemble_joint(inst, spec, y);
    double dot = 0;
    for (std::size_t i = 0; i < dense.size(); ++i) dot += w.values[i] * dense[i];
    const double blockwise = js::score_joint(w, inst, spec, y);
    if (std::abs(blockwise - dot) <= 1e-9 * std::max(1.0, std::abs(dot))) ++dense_pass;
  }

  std::cout << "pose-conditional exactness: " << pose_pass << "/" << instances << "\n";
  std::cout << "attr-conditional exactness: " << attr_pass << "/" << instances << "\n";
  std::cout << "joint-inference contracts:  " << joint_pass << "/" << instances << "\n";
  std::cout << "blockwise-vs-dense score:   " << dense_pass << "/" << instances << "\n";
  const bool all = pose_pass == instances && attr_pass == instances && joint_pass == instances &&
                   dense_pass == instances;
  std::cout << (all ? "oracle-check: all passed" : "oracle-check: FAILURES") << "\n";
  return all ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint pose estimation and garment attribute classification engine"};
  app.require_subcommand(1);

  // model validate
  auto* model_cmd = app.add_subcommand("model", "model file operations");
  model_cmd->require_subcommand(1);
  auto* model_validate = model_cmd->add_subcommand("validate", "validate a model config file");
  std::string model_path;
  model_validate->add_option("path", model_path, "model file")->required();

  // data validate
  auto* data_cmd = app.add_subcommand("data", "dataset file operations");
  data_cmd->require_subcommand(1);
  auto* data_validate = data_cmd->add_subcommand("validate", "validate a dataset file");
  std::string data_path, data_model;
  data_validate->add_option("path", data_path, "dataset file")->required();
  data_validate->add_option("--model", data_model, "model file")->required();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset with planted weights");
  std::string synth_model, synth_config, synth_out;
  synth_cmd->add_option("--model", synth_model)->required();
  synth_cmd->add_option("--config", synth_config, "synth config json");
  synth_cmd->add_option("--out-dir", synth_out)->required();
  std::uint64_t synth_seed = 1;
  synth_cmd->add_option("--seed", synth_seed);

  // train
  auto* train_cmd = app.add_subcommand("train", "train weights with the structured SVM");
  std::string train_model, train_data, train_cfg_path, train_out;
  double train_alpha = 0.1, train_beta = 1.0;
  std::uint64_t train_seed = 1;
  bool train_mask_cross = false;
  train_cmd->add_option("--model", train_model)->required();
  train_cmd->add_option("--data", train_data)->required();
  train_cmd->add_option("--config", train_cfg_path, "training config json");
  train_cmd->add_option("--alpha", train_alpha);
  train_cmd->add_option("--beta", train_beta);
  train_cmd->add_option("--seed", train_seed);
  train_cmd->add_flag("--mask-cross", train_mask_cross, "zero all cross-task features");
  train_cmd->add_option("--out", train_out)->required();

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "joint inference over a dataset");
  std::string infer_model, infer_weights, infer_data, infer_out;
  double infer_alpha = 0.1, infer_beta = 1.0;
  int infer_max_iter = 10, infer_workers = 1;
  bool infer_mask_cross = false;
  infer_cmd->add_option("--model", infer_model)->required();
  infer_cmd->add_option("--weights", infer_weights)->required();
  infer_cmd->add_option("--data", infer_data)->required();
  infer_cmd->add_option("--alpha", infer_alpha);
  infer_cmd->add_option("--beta", infer_beta);
  infer_cmd->add_option("--max-iter", infer_max_iter);
  infer_cmd->add_option("--workers", infer_workers);
  infer_cmd->add_flag("--mask-cross", infer_mask_cross);
  infer_cmd->add_option("--out", infer_out)->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate predictions with PCP and GAP");
  std::string eval_pred, eval_data, eval_model, eval_out;
  double eval_threshold = js::kDefaultPcpThreshold;
  eval_cmd->add_option("--pred", eval_pred)->required();
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--pcp-threshold", eval_threshold);
  eval_cmd->add_option("--out", eval_out)->required();

  // gridsearch
  auto* grid_cmd = app.add_subcommand("gridsearch", "3-fold cross-validated alpha/beta search");
  std::string grid_model, grid_data, grid_cfg_path, grid_out, grid_out_weights;
  std::vector<double> grid_alphas, grid_betas;
  std::uint64_t grid_seed = 1;
  grid_cmd->add_option("--model", grid_model)->required();
  grid_cmd->add_option("--data", grid_data)->required();
  grid_cmd->add_option("--alpha", grid_alphas, "alpha grid")->required()->delimiter(',');
  grid_cmd->add_option("--beta", grid_betas, "beta grid")->required()->delimiter(',');
  grid_cmd->add_option("--config", grid_cfg_path);
  grid_cmd->add_option("--seed", grid_seed);
  grid_cmd->add_option("--out", grid_out)->required();
  grid_cmd->add_option("--out-weights", grid_out_weights);

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "joint vs separated and edge-free variants");
  std::string ab_model, ab_train, ab_test, ab_cfg_path, ab_out;
  double ab_alpha = 0.1, ab_beta = 1.0;
  std::uint64_t ab_seed = 1;
  ablate_cmd->add_option("--model", ab_model)->required();
  ablate_cmd->add_option("--train", ab_train)->required();
  ablate_cmd->add_option("--test", ab_test)->required();
  ablate_cmd->add_option("--config", ab_cfg_path);
  ablate_cmd->add_option("--alpha", ab_alpha);
  ablate_cmd->add_option("--beta", ab_beta);
  ablate_cmd->add_option("--seed", ab_seed);
  ablate_cmd->add_option("--out", ab_out)->required();

  // oracle-check
  auto* oracle_cmd = app.add_subcommand("oracle-check", "brute-force equivalence suites");
  int oracle_instances = 40;
  std::uint64_t oracle_seed = 7, oracle_cap = 10000000ULL;
  oracle_cmd->add_option("--instances", oracle_instances);
  oracle_cmd->add_option("--seed", oracle_seed);
  oracle_cmd->add_option("--cap", oracle_cap);

  // features dump
  auto* feat_cmd = app.add_subcommand("features", "feature debugging");
  feat_cmd->require_subcommand(1);
  auto* feat_dump = feat_cmd->add_subcommand("dump", "dump joint features of ground-truth labels");
  std::string fd_model, fd_data, fd_out;
  feat_dump->add_option("--model", fd_model)->required();
  feat_dump->add_option("--data", fd_data)->required();
  feat_dump->add_option("--out", fd_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (model_validate->parsed()) {
      const auto spec = js::load_model(model_path);
      const auto violations = js::validate_model(spec);
      for (const auto& v : violations)
        std::cerr << js::to_string(v.code) << ": " << v.message << "\n";
      if (violations.empty()) {
        std::cout << "model ok: D=" << spec.layout.total_dim << "\n";
        return kExitOk;
      }
      return kExitValidation;
    }

    if (data_validate->parsed()) {
      const auto spec = js::load_model(data_model);
      const auto data = js::load_dataset(data_path, spec);
      std::cout << "dataset ok: " << data.size() << " instances\n";
      return kExitOk;
    }

    if (synth_cmd->parsed()) {
      const auto spec = js::load_model(synth_model);
      js::SynthConfig cfg;
      if (!synth_config.empty()) cfg = js::synth_config_from_json(read_json(synth_config));
      if (synth_cmd->count("--seed")) cfg.seed = synth_seed;
      cfg.seed = env_seed_override(cfg.seed);
      const auto data = js::generate(cfg, spec);
      fs::create_directories(synth_out);
      js::save_dataset((fs::path(synth_out) / "train.json").string(), spec, data.train);
      js::save_dataset((fs::path(synth_out) / "test.json").string(), spec, data.test);
      js::save_weights((fs::path(synth_out) / "planted_weights.bin").string(), data.planted, spec);
      std::cout << "wrote " << data.train.size() << " train / " << data.test.size() << " test instances\n";
      return kExitOk;
    }

    if (train_cmd->parsed()) {
      const auto spec = js::load_model(train_model);
      const auto data = js::load_dataset(train_data, spec);
      auto cfg = load_train_config(train_cfg_path, train_seed);
      if (train_cmd->count("--seed")) cfg.seed = train_seed;
      cfg.seed = env_seed_override(cfg.seed);
      const auto result = js::train(data, spec, cfg, train_alpha, train_beta, train_mask_cross);
      js::save_weights(train_out, result.w, spec);
      std::cout << "trained on " << result.used_instances << " instances (" << result.unbindable
                << " unbindable), " << result.positive_count << " positives, " << result.negative_count
                << " negatives/round\n";
      for (std::size_t r = 0; r < result.objective_per_round.size(); ++r)
        std::cout << "round " << r << ": objective " << result.objective_per_round[r].front() << " -> "
                  << result.objective_per_round[r].back() << "\n";
      return kExitOk;
    }

    if (infer_cmd->parsed()) {
      const auto spec = js::load_model(infer_model);
      const auto w = js::load_weights(infer_weights, spec);
      const auto data = js::load_dataset(infer_data, spec);
      js::InferOptions opt;
      opt.alpha = infer_alpha;
      opt.beta = infer_beta;
      opt.max_iter = infer_max_iter;
      opt.cross_masked = infer_mask_cross;
      const auto results = run_inference(w, data, spec, opt, infer_workers);
      write_json(infer_out, results_to_json(spec, data, results, infer_alpha, infer_beta, infer_max_iter));
      std::cout << "inferred " << results.size() << " instances\n";
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      const auto spec = js::load_model(eval_model);
      const auto data = js::load_dataset(eval_data, spec);
      const auto pred = read_json(eval_pred);
      std::map<std::string, js::JointLabel> by_id;
      for (const auto& r : pred.at("results"))
        by_id[r.at("id").get<std::string>()] = {r.at("pose").get<std::vector<int>>(),
                                                r.at("attributes").get<std::vector<int>>()};
      std::vector<js::InstanceEval> evals;
      for (const auto& inst : data) {
        if (!inst.ground_truth) continue;
        auto it = by_id.find(inst.id);
        if (it == by_id.end())
          js::fail(js::ErrorCode::InvalidArgument, "no prediction for instance " + inst.id);
        js::check_label(it->second, inst, spec);
        evals.push_back(js::evaluate_instance(inst, spec, it->second, eval_threshold));
      }
      const auto report = js::aggregate(evals, spec);
      write_json(eval_out, js::report_to_json(report, spec, eval_threshold));
      std::cout << "total PCP " << report.pose_total.rate() << ", total GAP " << report.attr_total.rate()
                << "\n";
      return kExitOk;
    }

    if (grid_cmd->parsed()) {
      const auto spec = js::load_model(grid_model);
      const auto data = js::load_dataset(grid_data, spec);
      auto cfg = load_train_config(grid_cfg_path, grid_seed);
      if (grid_cmd->count("--seed")) cfg.seed = grid_seed;
      cfg.seed = env_seed_override(cfg.seed);
      std::vector<GridCell> cells;
      int runs = 0;
      const GridCell best = grid_search(data, spec, cfg, grid_alphas, grid_betas, cells, runs);
      js::ordered_json j;
      j["format"] = "jointstruct-gridsearch";
      j["folds"] = 3;
      j["training_runs"] = runs;
      js::ordered_json arr = js::ordered_json::array();
      for (const auto& c : cells)
        arr.push_back({{"alpha", c.alpha}, {"beta", c.beta}, {"pcp", c.pcp}, {"gap", c.gap}});
      j["cells"] = std::move(arr);
      j["best"] = {{"alpha", best.alpha}, {"beta", best.beta}, {"pcp", best.pcp}, {"gap", best.gap}};
      write_json(grid_out, j);
      std::cout << "best alpha " << best.alpha << " beta " << best.beta << " (pcp " << best.pcp
                << ", gap " << best.gap << ") over " << runs << " training runs\n";
      if (!grid_out_weights.empty()) {
        const auto trained = js::train(data, spec, cfg, best.alpha, best.beta);
        js::save_weights(grid_out_weights, trained.w, spec);
      }
      return kExitOk;
    }

    if (ablate_cmd->parsed()) {
      const auto spec = js::load_model(ab_model);
      const auto train_data = js::load_dataset(ab_train, spec);
      const auto test_data = js::load_dataset(ab_test, spec);
      auto cfg = load_train_config(ab_cfg_path, ab_seed);
      if (ablate_cmd->count("--seed")) cfg.seed = ab_seed;
      cfg.seed = env_seed_override(cfg.seed);

      auto eval_variant = [&](const js::WeightVector& w, double alpha, bool mask_cross) {
        js::InferOptions opt;
        opt.alpha = alpha;
        opt.beta = ab_beta;
        opt.cross_masked = mask_cross;
        std::vector<js::InstanceEval> evals;
        for (const auto& inst : test_data) {
          if (!inst.ground_truth) continue;
          const auto res = js::infer_joint(w, inst, spec, opt);
          evals.push_back(js::evaluate_instance(inst, spec, res.label));
        }
        return js::aggregate(evals, spec);
      };

      const auto joint = js::train(train_data, spec, cfg, ab_alpha, ab_beta);
      const auto separated = js::train(train_data, spec, cfg, ab_alpha, ab_beta, /*cross_masked=*/true);
      const auto noedge = js::train(train_data, spec, cfg, 0.0, ab_beta);

      const auto rep_joint = eval_variant(joint.w, ab_alpha, false);
      const auto rep_sep = eval_variant(separated.w, ab_alpha, true);
      const auto rep_noedge = eval_variant(noedge.w, 0.0, false);

      auto reduction = [](double rate_joint, double rate_base) {
        const double err_j = 1.0 - rate_joint, err_b = 1.0 - rate_base;
        if (err_b <= 0.0) return 0.0;
        return 1.0 - err_j / err_b;
      };

      js::ordered_json j;
      j["format"] = "jointstruct-ablation";
      js::ordered_json parts = js::ordered_json::object();
      for (int i = 0; i < spec.parts.part_count; ++i)
        parts[spec.parts.part_names[i]] = {
            {"joint", rep_joint.per_part[i].rate()},
            {"separated", rep_sep.per_part[i].rate()},
            {"no_edge", rep_noedge.per_part[i].rate()},
            {"err_reduction_vs_separated",
             reduction(rep_joint.per_part[i].rate(), rep_sep.per_part[i].rate())},
            {"err_reduction_vs_no_edge",
             reduction(rep_joint.per_part[i].rate(), rep_noedge.per_part[i].rate())}};
      j["parts"] = std::move(parts);
      js::ordered_json attrs = js::ordered_json::object();
      for (int k = 0; k < spec.attrs.attribute_count; ++k)
        attrs[spec.attrs.names[k]] = {
            {"joint", rep_joint.per_attr[k].rate()},
            {"separated", rep_sep.per_attr[k].rate()},
            {"err_reduction_vs_separated",
             reduction(rep_joint.per_attr[k].rate(), rep_sep.per_attr[k].rate())}};
      j["attributes"] = std::move(attrs);
      j["totals"] = {{"joint_pcp", rep_joint.pose_total.rate()},
                     {"separated_pcp", rep_sep.pose_total.rate()},
                     {"no_edge_pcp", rep_noedge.pose_total.rate()},
                     {"joint_gap", rep_joint.attr_total.rate()},
                     {"separated_gap", rep_sep.attr_total.rate()}};
      write_json(ab_out, j);
      std::cout << "joint PCP " << rep_joint.pose_total.rate() << " vs separated "
                << rep_sep.pose_total.rate() << " vs no-edge " << rep_noedge.pose_total.rate() << "\n";
      std::cout << "joint GAP " << rep_joint.attr_total.rate() << " vs separated "
                << rep_sep.attr_total.rate() << "\n";
      return kExitOk;
    }

    if (oracle_cmd->parsed())
      return cmd_oracle_check(oracle_instances, env_seed_override(oracle_seed), oracle_cap);

    if (feat_dump->parsed()) {
      const auto spec = js::load_model(fd_model);
      const auto data = js::load_dataset(fd_data, spec);
      js::ordered_json arr = js::ordered_json::array();
      for (const auto& inst : data) {
        if (!inst.ground_truth) continue;
        const auto bound = js::bind_ground_truth(inst, spec);
        if (!bound) continue;
        const auto& y = bound->labels.front();
        const auto dense = js::assemble_joint(inst, spec, y);
        js::ordered_json rec;
        rec["id"] = inst.id;
        rec["pose"] = y.pose;
        rec["attributes"] = y.attrs;
        js::ordered_json blocks = js::ordered_json::object();
        for (const auto& b : spec.layout.blocks)
          blocks[b.name] = std::vector<double>(dense.begin() + b.offset, dense.begin() + b.offset + b.length);
        rec["blocks"] = std::move(blocks);
        arr.push_back(std::move(rec));
      }
      if (arr.empty()) js::fail(js::ErrorCode::NoGroundTruth, "no bindable instances to dump");
      const std::size_t count = arr.size();
      js::ordered_json j;
      j["format"] = "jointstruct-features";
      j["instances"] = std::move(arr);
      write_json(fd_out, j);
      std::cout << "dumped " << count << " feature records\n";
      return kExitOk;
    }
  } catch (const js::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
