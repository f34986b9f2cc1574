// kbc: knowledge base construction from the command line.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "kbc/bench.hpp"
#include "kbc/catalog.hpp"
#include "kbc/datastore.hpp"
#include "kbc/factorgraph.hpp"
#include "kbc/kb.hpp"
#include "kbc/learner.hpp"
#include "kbc/query.hpp"
#include "kbc/sampler.hpp"
#include "kbc/synth.hpp"

namespace fs = std::filesystem;
using namespace kbc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Globals {
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string data_dir;
  bool verbose = false;
};

/// Tags errors with the pipeline stage that raised them.
struct StageError {
  std::string stage;
  Error error;
};

template <class Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw StageError{name, e};
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
}

void print_stats(const GroundingStats& s) {
  std::cout << "variables\t" << s.n_variables << "\nfactors\t" << s.n_factors << "\nparameters\t" << s.n_parameters
            << "\n";
}

struct LearnFlags {
  double eta = 0.01, lambda = 0.01, decay = 0.95;
  std::size_t epochs = 10;
  std::string granularity = "per_sweep";

  void add(CLI::App* app) {
    app->add_option("--eta", eta, "learning rate")->capture_default_str();
    app->add_option("--lambda", lambda, "l2 regularization")->capture_default_str();
    app->add_option("--epochs", epochs, "passes over the corpus")->capture_default_str();
    app->add_option("--decay", decay, "per-epoch learning-rate factor")->capture_default_str();
    app->add_option("--granularity", granularity, "per_sweep or per_step")->capture_default_str();
  }
  LearnConfig config(const Globals& g) const {
    LearnConfig c;
    c.eta = eta, c.lambda = lambda, c.epochs = epochs, c.eta_decay = decay, c.workers = g.workers, c.seed = g.seed;
    auto gr = parse_granularity(granularity);
    if (!gr) throw Error(Errc::InvalidArgument, "unknown granularity '" + granularity + "'");
    c.granularity = *gr;
    return c;
  }
};

struct SampleFlags {
  std::size_t sweeps = 1000, burn_in = 100;

  void add(CLI::App* app) {
    app->add_option("--sweeps", sweeps, "sweeps after burn-in")->capture_default_str();
    app->add_option("--burn-in", burn_in, "burn-in sweeps")->capture_default_str();
  }
  SamplerConfig config(const Globals& g) const {
    SamplerConfig c;
    c.sweeps = sweeps, c.burn_in_sweeps = burn_in, c.seed = g.seed, c.workers = g.workers;
    return c;
  }
};

TrainResult run_learning(KnowledgeBase& kb, const LearnConfig& config, const Globals& g) {
  const auto corpus = make_corpus(kb.grounding);
  if (g.verbose)
    std::cerr << "learning on " << corpus.examples.size() << " samples, " << corpus.num_weights << " weights\n";
  auto result = config.workers > 1 ? parallel_train(corpus, config, kb.grounding.weights)
                                   : train(corpus, config, kb.grounding.weights);
  kb.grounding.weights = result.weights;
  return result;
}

void load_weights_override(KnowledgeBase& kb, const std::string& path) {
  if (!path.empty()) apply_weights(kb.grounding, read_weights_file(path));
}

Value parse_sample(const std::string& text) {
  if (auto i = parse_integer(text)) return Value(*i);
  return Value(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge base construction: ground rules over tables, learn weights, answer queries."};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--workers", g.workers, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--data-dir", g.data_dir, "directory holding schema.ini and the table CSVs");
  app.add_flag("--verbose,-v", g.verbose, "progress on stderr");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "load and validate tables, print statistics");
  std::string ingest_out;
  ingest->add_option("--out", ingest_out, "write the canonical copy here");

  // compile
  auto* compile = app.add_subcommand("compile", "ground rules into a KB");
  std::string rules_path, kb_out;
  double max_factors = 1e9;
  compile->add_option("--rules", rules_path, "rule file (.kbr)")->required();
  compile->add_option("--out", kb_out, "KB directory")->required();
  compile->add_option("--max-factors", max_factors, "projected factor cap")->capture_default_str();

  // learn
  auto* learn = app.add_subcommand("learn", "learn weights by CD-1");
  std::string kb_dir, weights_out;
  LearnFlags lf;
  learn->add_option("--kb", kb_dir, "KB directory")->required();
  learn->add_option("--out", weights_out, "weights file (default: the KB's own)");
  lf.add(learn);

  // query
  auto* query = app.add_subcommand("query", "answer a conjunctive query");
  std::string query_path, weights_in;
  std::size_t top = 10;
  bool as_json = false, exact = false;
  SampleFlags sf;
  query->add_option("--kb", kb_dir, "KB directory")->required();
  query->add_option("--weights", weights_in, "weights file overriding the KB's");
  query->add_option("--query", query_path, "query file (.kbq)")->required();
  query->add_option("--top", top, "answers to print (0 = all)")->capture_default_str();
  query->add_flag("--json", as_json, "JSON output");
  query->add_flag("--exact", exact, "exact enumeration instead of sampling");
  sf.add(query);

  // oracle
  auto* oracle = app.add_subcommand("oracle", "exact marginals for one sample");
  std::string sample_text;
  oracle->add_option("--kb", kb_dir, "KB directory")->required();
  oracle->add_option("--sample", sample_text, "sample id")->required();
  oracle->add_option("--query", query_path, "query file; without it every label marginal is printed");
  oracle->add_option("--weights", weights_in, "weights file overriding the KB's");

  // bench
  auto* bench = app.add_subcommand("bench", "sampler throughput or scaling benchmark");
  std::string bench_spec;
  bench->add_option("--spec", bench_spec, "benchmark spec (JSON)")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset from known weights");
  std::string synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "synthetic spec (JSON)")->required();
  synth->add_option("--out", synth_out, "output directory")->required();

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "ingest, compile and learn in one go");
  bool dry_run = false;
  pipeline->add_option("--rules", rules_path, "rule file (.kbr)")->required();
  pipeline->add_option("--out", kb_out, "KB directory")->required();
  pipeline->add_flag("--dry-run", dry_run, "compile only; report stats, write nothing");
  pipeline->add_option("--max-factors", max_factors, "projected factor cap")->capture_default_str();
  LearnFlags pf;
  pf.add(pipeline);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  auto need_data_dir = [&] {
    if (g.data_dir.empty()) throw Error(Errc::InvalidArgument, "--data-dir is required");
    return fs::path(g.data_dir);
  };

  try {
    if (*ingest) {
      const auto db = stage("ingest", [&] { return Database::load(need_data_dir()); });
      std::cout << "table\trows\tcolumn\tdistinct\tnulls\n";
      for (const auto& [name, table] : db.tables()) {
        const auto st = table_stats(table);
        for (const auto& c : st.columns)
          std::cout << name << '\t' << st.row_count << '\t' << c.name << '\t' << c.distinct << '\t' << c.nulls << '\n';
        if (st.positives_per_sample)
          std::cout << name << '\t' << st.row_count << "\t(positives per sample)\t"
                    << format_real(*st.positives_per_sample) << "\t0\n";
      }
      if (!ingest_out.empty()) db.save(ingest_out);
    } else if (*compile) {
      GroundOptions opts{max_factors, g.workers};
      auto kb = stage("compile", [&] {
        auto db = Database::load(need_data_dir());
        return compile_kb(std::move(db), read_file(rules_path), opts);
      });
      kb.manifest.seed = g.seed;
      save_kb(kb_out, kb);
      print_stats(kb.grounding.stats());
    } else if (*learn) {
      const auto config = lf.config(g);
      auto kb = stage("load", [&] { return load_kb(kb_dir, {1e9, g.workers}); });
      const auto result = stage("learn", [&] { return run_learning(kb, config, g); });
      if (weights_out.empty()) {
        store_kb_weights(kb_dir, kb);
        write_file(fs::path(kb_dir) / "metrics.json", format_metrics_json(result.log));
      } else {
        write_weights_file(weights_out, kb.grounding.weights);
        write_file(weights_out + ".metrics.json", format_metrics_json(result.log));
      }
      if (g.verbose)
        for (const auto& m : result.log)
          std::cerr << "epoch " << m.epoch << " eta " << m.eta << " |grad| " << m.mean_abs_gradient << " |w| "
                    << m.weight_norm << " " << m.samples_per_second << " samples/s\n";
    } else if (*query) {
      auto kb = stage("load", [&] { return load_kb(kb_dir, {1e9, g.workers}); });
      load_weights_override(kb, weights_in);
      const auto q = stage("parse", [&] {
        return parse_query(read_file(query_path), PredicateRegistry::from_database(kb.db));
      });
      const auto answers = stage("query", [&] {
        return answer(q, kb, sf.config(g), top, exact ? Estimator::Exact : Estimator::Gibbs);
      });
      if (as_json) {
        auto arr = nlohmann::json::array();
        for (std::size_t i = 0; i < answers.size(); ++i) {
          auto tuple = nlohmann::json::array();
          for (const auto& v : answers[i].tuple) {
            if (v.is_integer()) tuple.push_back(v.as_integer());
            else if (v.is_real()) tuple.push_back(v.as_real());
            else if (v.is_boolean()) tuple.push_back(v.as_boolean());
            else if (v.is_text()) tuple.push_back(v.as_text());
            else tuple.push_back(nullptr);
          }
          arr.push_back({{"rank", i + 1}, {"tuple", tuple}, {"probability", answers[i].probability}});
        }
        std::cout << arr.dump(2) << "\n";
      } else {
        for (std::size_t i = 0; i < answers.size(); ++i)
          std::cout << i + 1 << '\t' << format_tuple(answers[i].tuple) << '\t' << format_real(answers[i].probability)
                    << '\n';
      }
    } else if (*oracle) {
      auto kb = stage("load", [&] { return load_kb(kb_dir, {1e9, g.workers}); });
      load_weights_override(kb, weights_in);
      const Value sample = parse_sample(sample_text);
      if (!query_path.empty()) {
        const auto q = stage("parse", [&] {
          return parse_query(read_file(query_path), PredicateRegistry::from_database(kb.db));
        });
        const auto answers = stage("oracle", [&] {
          return answer(q, kb, SamplerConfig{}, 0, Estimator::Exact, sample);
        });
        for (std::size_t i = 0; i < answers.size(); ++i)
          std::cout << i + 1 << '\t' << format_tuple(answers[i].tuple) << '\t' << format_real(answers[i].probability)
                    << '\n';
      } else {
        const auto gi = kb.grounding.graph_index(sample);
        if (!gi) throw Error(Errc::UnknownSample, "sample " + sample.to_literal() + " has no factor graph");
        const auto& graph = kb.grounding.graphs[*gi];
        const auto marg = stage("oracle", [&] { return exact_marginals(graph, kb.grounding.weights.values()); });
        std::cout << "variable\tvalue\tprobability\n";
        for (std::uint32_t v = 0; v < graph.num_variables(); ++v) {
          const auto& d = graph.variable(v);
          if (!d.is_discrete()) continue;
          for (std::int32_t k = 0; k < d.cardinality; ++k) {
            const Value label = d.kind == VariableKind::Boolean ? Value(k == 1) : kb.grounding.domains[d.predicate][k];
            std::cout << kb.grounding.describe_variable(*gi, v) << '\t' << label.to_literal() << '\t'
                      << format_real(marg[v][k]) << '\n';
          }
        }
      }
    } else if (*bench) {
      const auto spec = parse_bench_spec(read_file(bench_spec));
      if (spec.mode == "throughput") {
        auto gspec = spec.graphs;
        const auto model = make_synthetic_model(gspec);
        std::cout << "graph_size,workers,vars_per_second\n";
        for (auto w : spec.workers) {
          SamplerConfig c;
          c.sweeps = spec.sweeps, c.seed = g.seed, c.workers = w;
          const auto r = throughput_bench(c, model);
          std::cout << r.variables << ',' << w << ',' << format_real(r.vars_per_second) << '\n';
        }
      } else {
        LearnConfig lc;
        lc.seed = g.seed;
        const auto r = scaling_bench(spec.sizes, spec.synth, lc);
        std::cout << format_scaling_csv(r);
      }
    } else if (*synth) {
      const auto spec = stage("synth", [&] { return parse_synth_spec(read_file(synth_spec)); });
      const auto result = stage("synth", [&] { return synthesize(spec); });
      write_synth(synth_out, spec, result);
      std::cout << "samples\t" << spec.samples << "\nweights\t" << result.truth.size() << "\n";
    } else if (*pipeline) {
      const auto config = pf.config(g);
      auto db = stage("ingest", [&] { return Database::load(need_data_dir()); });
      const auto rules = stage("compile", [&] { return read_file(rules_path); });
      GroundOptions opts{max_factors, g.workers};
      auto kb = stage("compile", [&] { return compile_kb(std::move(db), rules, opts); });
      kb.manifest.seed = g.seed;
      if (dry_run) {
        print_stats(factor_count_report(kb.rules, kb.db));
        return kOk;
      }
      const auto result = stage("learn", [&] { return run_learning(kb, config, g); });
      save_kb(kb_out, kb);
      write_file(fs::path(kb_out) / "metrics.json", format_metrics_json(result.log));
      print_stats(kb.grounding.stats());
    }
  } catch (const StageError& e) {
    std::cerr << "kbc: " << e.stage << ": " << e.error.what() << "\n";
    switch (error_class(e.error.code())) {
      case ErrorClass::Usage: return kUsage;
      case ErrorClass::Numerical: return kNumerical;
      default: return kData;
    }
  } catch (const Error& e) {
    std::cerr << "kbc: " << e.what() << "\n";
    switch (error_class(e.code())) {
      case ErrorClass::Usage: return kUsage;
      case ErrorClass::Numerical: return kNumerical;
      default: return kData;
    }
  } catch (const std::exception& e) {
    std::cerr << "kbc: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
