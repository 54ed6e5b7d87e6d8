#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "higarment/checkpoint.hpp"
#include "higarment/errors.hpp"
#include "higarment/eval.hpp"
#include "higarment/fabric_db.hpp"
#include "higarment/hash.hpp"
#include "higarment/manifest.hpp"
#include "higarment/suites.hpp"
#include "higarment/synth.hpp"

namespace hg::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestName = "run_manifest.json";

// Per-invocation bookkeeping for the RunManifest.
struct Session {
  RunManifest manifest;
  std::optional<fs::path> manifest_path;
  std::ostringstream out;

  void input(const fs::path& p) { manifest.inputs.push_back(hash_file_record(p)); }
  void output(const fs::path& p, bool volatile_content = false) {
    manifest.outputs.push_back(hash_file_record(p, volatile_content));
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::optional<std::string> env_lookup(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

void require_db_size(const FabricDb& db, std::size_t size) {
  for (const auto& e : db.entries()) {
    if (e.image.width() != size || e.image.height() != size) {
      throw ValidationError("fabric swatch '" + e.canonical + "' is " + std::to_string(e.image.width()) +
                            "x" + std::to_string(e.image.height()) + ", expected " + std::to_string(size) +
                            "x" + std::to_string(size));
    }
  }
}

// Writes a db and records every file it produced.
void save_db_recorded(const FabricDb& db, const fs::path& path, Session& s) {
  db.save(path);
  for (const auto& e : db.entries()) s.output(path.parent_path() / e.image_path);
  s.output(path);
}

void record_db_inputs(const FabricDb& db, const fs::path& path, Session& s) {
  s.input(path);
  for (const auto& e : db.entries()) s.input(path.parent_path() / e.image_path);
}

std::vector<double> parse_grid(const std::string& text) {
  double lo = 0, hi = 0, step = 0;
  char c1 = 0, c2 = 0;
  std::istringstream is(text);
  if (!(is >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !is.eof()) {
    throw ValidationError("grid must look like start:stop:step, got '" + text + "'");
  }
  if (!(step > 0.0) || hi < lo) throw ValidationError("grid '" + text + "' is empty");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(std::round((lo + step * i) * 1e9) / 1e9);
  for (double a : out)
    if (!(a > 0.0 && a <= 1.0)) throw ValidationError("grid values must lie in (0, 1]");
  return out;
}

Image heatmap(const Tensor& weights, std::size_t z_tokens, std::size_t side) {
  Image img(side, side, 1);
  std::vector<double> mass(weights.rows(), 0.0);
  for (std::size_t q = 0; q < weights.rows(); ++q)
    for (std::size_t k = 0; k < z_tokens && k < weights.cols(); ++k) mass[q] += weights(q, k);
  const auto [mn, mx] = std::minmax_element(mass.begin(), mass.end());
  const double range = *mx - *mn;
  for (std::size_t q = 0; q < mass.size() && q < side * side; ++q)
    img.pixels()[q] = range > 0.0 ? (mass[q] - *mn) / range : 0.0;
  img.quantize();
  return img;
}

nlohmann::ordered_json fabric_json(const FabricResolution& r) {
  nlohmann::ordered_json j;
  switch (r.kind) {
    case FabricResolution::Kind::kNone: j["kind"] = "none"; break;
    case FabricResolution::Kind::kExact: j["kind"] = "exact"; break;
    case FabricResolution::Kind::kFallback: j["kind"] = "fallback"; break;
  }
  j["term"] = r.term;
  j["canonical"] = r.canonical;
  nlohmann::ordered_json scores = nlohmann::ordered_json::object();
  for (const auto& [name, v] : r.scores) scores[name] = v;
  j["scores"] = scores;
  return j;
}

// Samples one image into `dir` under `name`; returns the trace.
SampleTrace sample_into(HiGarment& model, const Image& sketch, const std::string& prompt, std::uint64_t seed,
                        std::size_t steps, std::optional<double> alpha, const fs::path& dir,
                        const std::string& name, Session& s, bool diagnostics) {
  SampleTrace trace;
  Image img = model.sample(sketch, prompt, seed, steps, alpha, &trace);
  const fs::path img_path = dir / name;
  write_netpbm(img, img_path);
  s.output(img_path);
  if (!diagnostics) return trace;
  const std::string stem = fs::path(name).stem().string();
  nlohmann::ordered_json j;
  j["prompt"] = prompt;
  j["seed"] = seed;
  j["s"] = trace.s;
  j["alpha"] = trace.alpha;
  j["alpha_source"] = alpha ? "override" : (model.config().use_hca ? "gate" : "fixed");
  j["z_norm"] = trace.z_norm;
  j["denoiser_evals"] = trace.denoiser_evals;
  j["context_tokens"] = trace.context_tokens;
  j["fabric"] = fabric_json(trace.fabric);
  const std::size_t z_tokens = trace.context_tokens - split_words(prompt).size();
  j["z_tokens"] = z_tokens;
  nlohmann::ordered_json maps = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < trace.attention.size(); ++k) {
    const std::string file = stem + "_attn_layer" + std::to_string(k) + ".pgm";
    write_netpbm(heatmap(trace.attention[k], z_tokens, trace.attention_grid[k]), dir / file);
    s.output(dir / file);
    maps.push_back({{"layer", k}, {"file", file}, {"grid", trace.attention_grid[k]}});
  }
  j["attention_maps"] = maps;
  const fs::path diag = dir / (stem + "_diagnostics.json");
  write_text_file(diag, j.dump(2) + "\n");
  s.output(diag);
  return trace;
}

// ---- commands -------------------------------------------------------------

struct GenDataArgs {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double conflict = 0.0;
  std::size_t size = 32;
  double alias = 0.5;
  std::string out;
};

void cmd_gen_data(const GenDataArgs& a, Session& s) {
  s.manifest.seed = a.seed;
  const auto ds = synth::gen_dataset(a.n, a.seed, a.conflict, a.size, a.alias);
  const fs::path out(a.out);
  synth::write_dataset(ds, out);
  for (const auto& r : ds.records) {
    s.output(out / r.sketch_file);
    s.output(out / r.target_file);
  }
  s.output(out / "manifest.jsonl");
  save_db_recorded(grammar_fabric_db(a.size, a.seed), out / "fabric_db" / "db.jsonl", s);
  std::size_t conflicted = 0;
  for (const auto& r : ds.records) conflicted += r.spec.conflicted() ? 1 : 0;
  s.out << "wrote " << ds.records.size() << " samples (" << conflicted << " conflicted) to " << a.out << "\n";
  s.out << "manifest " << git_blob_hash(synth::manifest_text(ds.records)) << "\n";
  s.manifest_path = out / kManifestName;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string db;
  std::string out;
};

void cmd_train(const TrainArgs& a, Session& s) {
  RunConfig cfg;
  if (!a.config.empty()) {
    require_file(a.config, "config file");
    cfg = load_config(a.config);
    s.input(a.config);
  }
  const auto overridden = apply_env_overrides(cfg, env_lookup);
  for (const auto& k : overridden) s.out << "env override " << env_name(k) << "\n";
  s.manifest.seed = cfg.seed;
  s.manifest.config = config_to_text(cfg);

  const fs::path data(a.data);
  require_dir(data, "dataset directory");
  const fs::path db_path = a.db.empty() ? data / "fabric_db" / "db.jsonl" : fs::path(a.db);
  require_file(db_path, "fabric db");
  const synth::Dataset ds = synth::read_dataset(data);
  s.input(data / "manifest.jsonl");
  for (const auto& r : ds.records) {
    s.input(data / r.sketch_file);
    s.input(data / r.target_file);
  }
  FabricDb db = FabricDb::load(db_path);
  record_db_inputs(db, db_path, s);
  require_db_size(db, cfg.model.image_size);

  HiGarment model(cfg.model, grammar_vocabulary(), db, cfg.seed);
  std::vector<TrainItem> items;
  for (const auto& smp : ds.samples) items.push_back({&smp.sketch, &smp.target, smp.caption});

  const fs::path out(a.out);
  fs::create_directories(out);
  std::string log = "step,loss,wall_time_s\n";
  const auto t0 = std::chrono::steady_clock::now();
  TrainOptions opt;
  opt.adam = {cfg.lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps};
  opt.batch = cfg.batch;
  opt.steps = cfg.steps;
  opt.seed = cfg.seed;
  opt.on_step = [&](std::size_t step, double loss) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log += std::to_string(step) + "," + fmt("%.9g", loss) + "," + fmt("%.3f", wall) + "\n";
    if (step % 100 == 0 || step + 1 == cfg.steps) s.out << "step " << step << " loss " << fmt("%.6f", loss) << "\n";
  };
  try {
    train(model, items, opt);
  } catch (const NumericError&) {
    write_text_file(out / "loss.csv", log);
    throw;
  }

  save_checkpoint(model.params(), out / "model.hgck");
  s.output(out / "model.hgck");
  write_text_file(out / "config.txt", config_to_text(cfg));
  s.output(out / "config.txt");
  model.vocab().save(out / "vocab.tsv");
  s.output(out / "vocab.tsv");
  write_text_file(out / "loss.csv", log);
  s.output(out / "loss.csv", true);
  save_db_recorded(db, out / "fabric_db" / "db.jsonl", s);
  s.manifest_path = out / kManifestName;
}

struct SampleArgs {
  std::string ckpt;
  std::string sketch;
  std::string prompt;
  std::string input;
  std::optional<double> alpha;
  std::uint64_t seed = 0;
  std::optional<std::size_t> steps;
  std::string out;
};

void cmd_sample(const SampleArgs& a, Session& s) {
  LoadedRun run = load_run(a.ckpt);
  for (const auto& f : run.files) s.input(f);
  s.manifest.seed = a.seed;
  s.manifest.config = config_to_text(run.config);
  const std::size_t steps = a.steps.value_or(run.config.ddim_steps);
  const std::optional<double> alpha = a.alpha ? a.alpha : run.config.alpha_override;
  const fs::path out(a.out);
  fs::create_directories(out);
  if (!a.input.empty()) {
    if (!a.sketch.empty() || !a.prompt.empty()) throw ValidationError("--input excludes --sketch/--prompt");
    const synth::Dataset ds = synth::read_dataset(a.input);
    s.input(fs::path(a.input) / "manifest.jsonl");
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      s.input(fs::path(a.input) / ds.records[i].sketch_file);
      sample_into(*run.model, ds.samples[i].sketch, ds.samples[i].caption, a.seed, steps, alpha, out,
                  ds.records[i].target_file, s, false);
    }
    s.out << "sampled " << ds.samples.size() << " images into " << a.out << "\n";
  } else {
    if (a.sketch.empty() || a.prompt.empty()) throw ValidationError("need --sketch and --prompt (or --input)");
    require_file(a.sketch, "sketch");
    const Image sketch = read_netpbm(a.sketch);
    s.input(a.sketch);
    const SampleTrace tr = sample_into(*run.model, sketch, a.prompt, a.seed, steps, alpha, out, "sample.ppm", s, true);
    s.out << "s " << fmt("%.6f", tr.s) << " alpha " << fmt("%.6f", tr.alpha) << " denoiser_evals "
          << tr.denoiser_evals << "\n";
  }
  s.manifest_path = out / kManifestName;
}

struct SweepArgs {
  std::string ckpt;
  std::string input;
  std::size_t index = 0;
  std::string sketch;
  std::string prompt;
  std::string grid = "0.6:1.0:0.1";
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_sweep(const SweepArgs& a, Session& s) {
  const auto grid = parse_grid(a.grid);
  LoadedRun run = load_run(a.ckpt);
  for (const auto& f : run.files) s.input(f);
  s.manifest.seed = a.seed;
  s.manifest.config = config_to_text(run.config);
  Image sketch;
  std::string prompt;
  if (!a.input.empty()) {
    const synth::Dataset ds = synth::read_dataset(a.input);
    if (a.index >= ds.samples.size()) throw ValidationError("--index out of range");
    sketch = ds.samples[a.index].sketch;
    prompt = ds.samples[a.index].caption;
    s.input(fs::path(a.input) / ds.records[a.index].sketch_file);
  } else {
    if (a.sketch.empty() || a.prompt.empty()) throw ValidationError("need --input or --sketch and --prompt");
    sketch = read_netpbm(a.sketch);
    prompt = a.prompt;
    s.input(a.sketch);
  }
  // Caption colour, when the prompt names one, and the prompted fabric swatch.
  std::optional<std::array<double, 3>> color;
  for (const auto& w : split_words(prompt))
    if (auto c = synth::find_color(w)) {
      color = synth::colors()[*c].rgb;
      break;
    }
  const Mask mask = foreground_mask(sketch);
  const Mask inner = erode(mask, sketch.width(), sketch.height());

  const fs::path out(a.out);
  fs::create_directories(out);
  std::string csv = "alpha,s,z_norm,silhouette_iou,color_err,texture_chi2\n";
  for (double alpha : grid) {
    const std::string name = "alpha_" + fmt("%.2f", alpha) + ".ppm";
    const SampleTrace tr = sample_into(*run.model, sketch, prompt, a.seed, run.config.ddim_steps, alpha, out,
                                       name, s, false);
    const Image img = read_netpbm(out / name);
    csv += fmt("%.2f", alpha) + "," + fmt("%.9g", tr.s) + "," + fmt("%.9g", tr.z_norm) + ",";
    csv += fmt("%.9g", silhouette_iou(img, sketch)) + ",";
    csv += (color && mask_count(mask) ? fmt("%.9g", color_err(img, *color, mask)) : std::string()) + ",";
    if (tr.fabric.entry && mask_count(inner)) csv += fmt("%.9g", texture_chi2(img, inner, tr.fabric.entry->image));
    csv += "\n";
  }
  write_text_file(out / "sweep.csv", csv);
  s.output(out / "sweep.csv");
  s.out << csv;
  s.manifest_path = out / kManifestName;
}

void cmd_db_build(const std::string& out_dir, std::size_t size, std::uint64_t seed, Session& s) {
  s.manifest.seed = seed;
  const FabricDb db = grammar_fabric_db(size, seed);
  save_db_recorded(db, fs::path(out_dir) / "db.jsonl", s);
  s.out << "built " << db.size() << " fabric entries in " << out_dir << "\n";
  s.manifest_path = fs::path(out_dir) / kManifestName;
}

void cmd_db_list(const std::string& db_path, Session& s) {
  require_file(db_path, "fabric db");
  const FabricDb db = FabricDb::load(db_path);
  record_db_inputs(db, db_path, s);
  for (const auto& e : db.entries()) {
    s.out << e.canonical << "\t";
    for (std::size_t i = 0; i < e.aliases.size(); ++i) s.out << (i ? "," : "") << e.aliases[i];
    s.out << "\t" << e.image_path << "\n";
  }
}

void cmd_db_query(const std::string& db_path, const std::string& prompt, const std::string& ckpt,
                  std::uint64_t seed, Session& s) {
  require_file(db_path, "fabric db");
  FabricDb db = FabricDb::load(db_path);
  record_db_inputs(db, db_path, s);
  s.manifest.seed = seed;
  std::unique_ptr<HiGarment> model;
  if (!ckpt.empty()) {
    LoadedRun run = load_run(ckpt);
    for (const auto& f : run.files) s.input(f);
    model = std::move(run.model);
  } else {
    RunConfig cfg;
    model = std::make_unique<HiGarment>(cfg.model, grammar_vocabulary(), FabricDb{}, seed);
  }
  TermEmbedder embed = [&](std::string_view term) { return model->embed_term(term); };
  db.refresh_keys(embed);
  const auto words = split_words(prompt);
  s.out << "prompt: " << prompt << "\n";
  s.out << describe_resolution(resolve_fabric(words, db, grammar_lexicon(), embed));
}

void cmd_gradcheck(const std::string& module, double fault, const std::string& out_dir, Session& s, bool& failed,
                   std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_gradcheck_suites(module, fault);
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  failed = false;
  for (const auto& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%-9s params %3zu  max_rel_err %.3e  tol %.0e  %s\n", r.name.c_str(),
                  r.report.parameters.size(), r.report.max_rel_error, r.tolerance, r.passed() ? "PASS" : "FAIL");
    s.out << line;
    failed = failed || !r.passed();
    nlohmann::ordered_json p = nlohmann::ordered_json::array();
    for (const auto& e : r.report.parameters)
      p.push_back({{"name", e.name}, {"checked", e.checked}, {"rel_error", e.rel_error}});
    j.push_back({{"suite", r.name}, {"tolerance", r.tolerance}, {"max_rel_error", r.report.max_rel_error},
                 {"passed", r.passed()}, {"parameters", p}});
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  err << "gradcheck finished in " << fmt("%.2f", wall) << " s\n";
  if (!out_dir.empty()) {
    write_text_file(fs::path(out_dir) / "gradcheck.json", j.dump(2) + "\n");
    s.output(fs::path(out_dir) / "gradcheck.json");
    s.manifest_path = fs::path(out_dir) / kManifestName;
  }
}

void cmd_eval(const std::string& gen_dir, const std::string& ref_manifest, const std::string& out_dir, Session& s) {
  require_dir(gen_dir, "generated directory");
  require_file(ref_manifest, "reference manifest");
  const fs::path ref_dir = fs::path(ref_manifest).parent_path();
  std::vector<synth::DatasetRecord> records;
  {
    std::istringstream is(read_text_file(ref_manifest));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        records.push_back(synth::record_from_json(nlohmann::json::parse(line)));
      } catch (const std::exception& e) {
        throw ValidationError(ref_manifest + " line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  s.input(ref_manifest);
  std::vector<std::string> missing;
  for (const auto& r : records)
    if (!fs::is_regular_file(fs::path(gen_dir) / r.target_file)) missing.push_back(r.target_file);
  if (!missing.empty()) {
    std::string names;
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i) names += (i ? ", " : "") + missing[i];
    if (missing.size() > 5) names += ", ...";
    throw ValidationError(std::to_string(missing.size()) + " generated image(s) missing: " + names);
  }
  std::size_t generated = 0;
  for (const auto& entry : fs::directory_iterator(gen_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") ++generated;
  if (generated != records.size()) {
    throw ValidationError("count mismatch: " + std::to_string(generated) + " generated images vs " +
                          std::to_string(records.size()) + " reference records");
  }
  std::vector<ReportRow> rows;
  for (const auto& r : records) {
    const fs::path gen = fs::path(gen_dir) / r.target_file;
    const fs::path ref = ref_dir / r.target_file;
    require_file(gen, "generated image");
    require_file(ref, "reference image");
    s.input(gen);
    s.input(ref);
    rows.push_back({r.target_file, evaluate_against_reference(read_netpbm(gen), read_netpbm(ref))});
  }
  const MetricReport mean = mean_report(rows);
  const fs::path out(out_dir);
  fs::create_directories(out);
  const std::vector<std::pair<std::string, std::string>> meta = {
      {"metrics", "proxy metrics (silhouette IoU, RGB error, orientation chi2); not CLIPScore/FID/LPIPS"},
      {"generated_dir", fs::absolute(gen_dir).lexically_normal().string()},
      {"reference_manifest", fs::absolute(ref_manifest).lexically_normal().string()}};
  write_text_file(out / "report.csv", report_csv(rows, meta));
  s.output(out / "report.csv");
  nlohmann::ordered_json summary;
  summary["rows"] = rows.size();
  summary["silhouette_iou"] = mean.silhouette_iou;
  summary["color_err"] = mean.color_err;
  summary["texture_chi2"] = mean.texture_chi2;
  summary["note"] = "proxy metrics; CLIPScore, FID and LPIPS are not computed";
  write_text_file(out / "summary.json", summary.dump(2) + "\n");
  s.output(out / "summary.json");
  s.out << "rows " << rows.size() << " silhouette_iou " << fmt("%.6f", mean.silhouette_iou) << " color_err "
        << fmt("%.6f", mean.color_err) << " texture_chi2 " << fmt("%.6f", mean.texture_chi2) << "\n";
  s.manifest_path = out / kManifestName;
}

int cmd_replay(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  const RunManifest m = load_manifest(manifest_path);
  if (!m.args.empty() && m.args.front() == "replay") throw ValidationError("cannot replay a replay");
  const fs::path prev = fs::current_path();
  std::ostringstream captured, captured_err;
  int code = 0;
  try {
    fs::current_path(m.cwd);
    code = run_cli(m.args, captured, captured_err);
  } catch (...) {
    fs::current_path(prev);
    throw;
  }
  fs::current_path(prev);
  if (code != kOk) {
    err << captured_err.str();
    throw ValidationError("replayed command exited with code " + std::to_string(code));
  }
  bool all = true;
  auto report = [&](const std::string& what, const std::string& want, const std::string& got) {
    const bool ok = want == got;
    all = all && ok;
    out << (ok ? "match    " : "MISMATCH ") << what << "\n";
  };
  report("stdout", m.stdout_hash, git_blob_hash(captured.str()));
  for (const auto& f : m.outputs) {
    if (f.volatile_content) {
      out << "skipped  " << f.path << " (wall-clock content)\n";
      continue;
    }
    report(f.path, f.hash, fs::exists(f.path) ? git_blob_hash_file(f.path) : std::string("<missing>"));
  }
  out << (all ? "replay identical\n" : "replay differs\n");
  return all ? kOk : kValidation;
}

}  // namespace

LoadedRun load_run(const fs::path& dir) {
  require_dir(dir, "checkpoint directory");
  LoadedRun run;
  const fs::path cfg_path = dir / "config.txt", vocab_path = dir / "vocab.tsv", ckpt = dir / "model.hgck";
  const fs::path db_path = dir / "fabric_db" / "db.jsonl";
  for (const auto& p : {cfg_path, vocab_path, ckpt, db_path}) require_file(p, "run file");
  run.config = load_config(cfg_path.string());
  FabricDb db = FabricDb::load(db_path);
  require_db_size(db, run.config.model.image_size);
  run.model = std::make_unique<HiGarment>(run.config.model, Vocabulary::load(vocab_path), db, run.config.seed);
  load_checkpoint(ckpt, run.model->params());
  run.model->refresh_fabric_keys();
  run.files = {cfg_path, vocab_path, ckpt, db_path};
  return run;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sketch + text garment generation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "higarment 1.0");
  Session session;
  std::string manifest_override;

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic sketch/caption/target dataset");
  gen->add_option("--n", gd.n, "Number of samples")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gd.seed, "Dataset seed");
  gen->add_option("--conflict-fraction", gd.conflict, "Fraction of samples whose sketch hint disagrees")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--size", gd.size, "Image side length")->check(CLI::Range(8, 64));
  gen->add_option("--alias-fraction", gd.alias, "Probability that a caption names the fabric by an alias")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--out", gd.out, "Output directory")->required();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train the model on a dataset");
  tr->add_option("--config", ta.config, "key=value config file (defaults when omitted)");
  tr->add_option("--data", ta.data, "Dataset directory")->required();
  tr->add_option("--db", ta.db, "Fabric db file (default DATA/fabric_db/db.jsonl)");
  tr->add_option("--out", ta.out, "Run output directory")->required();

  SampleArgs sa;
  auto* smp = app.add_subcommand("sample", "Generate images with DDIM");
  smp->add_option("--ckpt", sa.ckpt, "Run directory from train")->required();
  smp->add_option("--sketch", sa.sketch, "Sketch PGM");
  smp->add_option("--prompt", sa.prompt, "Text prompt");
  smp->add_option("--input", sa.input, "Dataset directory: sample every record");
  smp->add_option("--alpha", sa.alpha, "Override the gated alpha")->check(CLI::Range(1e-9, 1.0));
  smp->add_option("--seed", sa.seed, "Sampling seed");
  smp->add_option("--steps", sa.steps, "DDIM steps (default from config)")->check(CLI::PositiveNumber);
  smp->add_option("--out", sa.out, "Output directory")->required();

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep-alpha", "Sample one input over a grid of alpha values");
  sweep->add_option("--ckpt", sw.ckpt, "Run directory from train")->required();
  sweep->add_option("--input", sw.input, "Dataset directory");
  sweep->add_option("--index", sw.index, "Record index within --input");
  sweep->add_option("--sketch", sw.sketch, "Sketch PGM (instead of --input)");
  sweep->add_option("--prompt", sw.prompt, "Prompt (instead of --input)");
  sweep->add_option("--grid", sw.grid, "start:stop:step");
  sweep->add_option("--seed", sw.seed, "Sampling seed");
  sweep->add_option("--out", sw.out, "Output directory")->required();

  auto* db = app.add_subcommand("fabric-db", "Build, list or query the fabric database");
  db->require_subcommand(1);
  std::string db_out, db_path, db_prompt, db_ckpt;
  std::size_t db_size = 32;
  std::uint64_t db_seed = 0;
  auto* build = db->add_subcommand("build", "Build the db from the grammar swatches");
  build->add_option("--out", db_out, "Output directory")->required();
  build->add_option("--size", db_size, "Swatch side length")->check(CLI::Range(8, 64));
  build->add_option("--seed", db_seed, "Swatch seed");
  auto* list = db->add_subcommand("list", "List entries");
  list->add_option("--db", db_path, "db.jsonl")->required();
  auto* query = db->add_subcommand("query", "Trace extraction, normalisation and retrieval");
  query->add_option("--db", db_path, "db.jsonl")->required();
  query->add_option("--prompt", db_prompt, "Prompt")->required();
  query->add_option("--ckpt", db_ckpt, "Run directory whose text encoder embeds unknown terms");
  query->add_option("--seed", db_seed, "Encoder seed when no --ckpt is given");

  std::string gc_module = "all", gc_out;
  double gc_fault = 0.0;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gc->add_option("--module", gc_module, "all|mmse|hca|denoiser|full");
  gc->add_option("--out", gc_out, "Directory for gradcheck.json");
  gc->add_option("--inject-fault", gc_fault, "Scale analytic gradients by (1 + x)")->group("");

  std::string ev_gen, ev_ref, ev_out;
  auto* ev = app.add_subcommand("eval", "Proxy metrics of generated images against references");
  ev->add_option("--generated-dir", ev_gen, "Directory of generated PPMs named like the targets")->required();
  ev->add_option("--reference-manifest", ev_ref, "Dataset manifest.jsonl")->required();
  ev->add_option("--out", ev_out, "Output directory")->required();

  std::string rp_manifest;
  auto* rp = app.add_subcommand("replay", "Re-run a command from its manifest and compare hashes");
  rp->add_option("--manifest", rp_manifest, "run_manifest.json")->required();

  for (auto* sub : {gen, tr, smp, sweep, list, query, gc, ev}) {
    sub->add_option("--manifest-out", manifest_override, "Write the run manifest here");
  }
  build->add_option("--manifest-out", manifest_override, "Write the run manifest here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kOk : kUsage;
  }

  const auto t0 = std::chrono::steady_clock::now();
  session.manifest.args = args;
  session.manifest.cwd = fs::current_path().string();
  int code = kOk;
  try {
    if (rp->parsed()) return cmd_replay(rp_manifest, out, err);
    bool failed = false;
    if (gen->parsed()) {
      session.manifest.command = "gen-data";
      cmd_gen_data(gd, session);
    } else if (tr->parsed()) {
      session.manifest.command = "train";
      cmd_train(ta, session);
    } else if (smp->parsed()) {
      session.manifest.command = "sample";
      cmd_sample(sa, session);
    } else if (sweep->parsed()) {
      session.manifest.command = "sweep-alpha";
      cmd_sweep(sw, session);
    } else if (build->parsed()) {
      session.manifest.command = "fabric-db build";
      cmd_db_build(db_out, db_size, db_seed, session);
    } else if (list->parsed()) {
      session.manifest.command = "fabric-db list";
      cmd_db_list(db_path, session);
    } else if (query->parsed()) {
      session.manifest.command = "fabric-db query";
      cmd_db_query(db_path, db_prompt, db_ckpt, db_seed, session);
    } else if (gc->parsed()) {
      session.manifest.command = "gradcheck";
      cmd_gradcheck(gc_module, gc_fault, gc_out, session, failed, err);
    } else if (ev->parsed()) {
      session.manifest.command = "eval";
      cmd_eval(ev_gen, ev_ref, ev_out, session);
    }
    if (failed) code = kNumeric;
  } catch (const NumericError& e) {
    out << session.out.str();
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    out << session.out.str();
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    out << session.out.str();
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    out << session.out.str();
    err << "error: " << e.what() << "\n";
    return kValidation;
  }

  const std::string text = session.out.str();
  out << text;
  session.manifest.stdout_hash = git_blob_hash(text);
  session.manifest.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!manifest_override.empty()) session.manifest_path = manifest_override;
  if (session.manifest_path) {
    save_manifest(session.manifest, *session.manifest_path);
  } else {
    nlohmann::json j = nlohmann::json::parse(manifest_to_json(session.manifest));
    err << "manifest " << j.dump() << "\n";
  }
  return code;
}

}  // namespace hg::cli
