#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hmmgmr/data.hpp"
#include "hmmgmr/detail/text.hpp"
#include "hmmgmr/learning.hpp"
#include "hmmgmr/model_io.hpp"
#include "test_support.hpp"

using namespace hmmgmr;
namespace fs = std::filesystem;

namespace {

const char* cli_binary() {
  const char* path = std::getenv("HMMGMR_CLI");
  REQUIRE_MESSAGE(path != nullptr, "HMMGMR_CLI must point at the tool binary");
  return path;
}

fs::path workspace() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "hmmgmr_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const fs::path out_file = workspace() / "last_run.log";
  const std::string command =
      std::string(cli_binary()) + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(out_file);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  result.output = buffer.str();
  return result;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), ("missing file: " + path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// data rows of a '#'-commented csv
std::vector<std::vector<std::string>> csv_rows(const fs::path& path, bool skip_header = true) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (skip_header && !header_seen) {
      header_seen = true;
      continue;
    }
    rows.push_back(detail::split(t, ','));
  }
  return rows;
}

double to_double(const std::string& s) {
  double v = 0.0;
  REQUIRE(detail::parse_double(s, v));
  return v;
}

const fs::path& shared_corpus() {
  static const fs::path dir = [] {
    const fs::path d = workspace() / "corpus";
    const auto result = run_cli("synth --out " + d.string() + " --events 40 --len 50 --seed 5");
    REQUIRE(result.exit_code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes the corpus, truth model, and state paths deterministically") {
  const fs::path dir = shared_corpus();
  CHECK(fs::exists(dir / "events.csv"));
  CHECK(fs::exists(dir / "manifest.txt"));
  CHECK(fs::exists(dir / "truth_model.json"));
  CHECK(fs::exists(dir / "truth_states.csv"));

  const HmmModel truth = load_hmm(dir / "truth_model.json");
  CHECK(truth.k() == 3);

  const Corpus corpus = load_corpus(dir);
  CHECK(corpus.events.size() == 40);
  CHECK(corpus.split.train_ids.size() == 32);

  const fs::path again = workspace() / "corpus_again";
  REQUIRE(run_cli("synth --out " + again.string() + " --events 40 --len 50 --seed 5").exit_code ==
          0);
  CHECK(read_file(again / "events.csv") == read_file(dir / "events.csv"));
  CHECK(read_file(again / "manifest.txt") == read_file(dir / "manifest.txt"));
  CHECK(read_file(again / "truth_model.json") == read_file(dir / "truth_model.json"));
}

TEST_CASE("synth rejects invalid requests") {
  CHECK(run_cli("synth --out " + (workspace() / "bad").string() + " --events 0").exit_code == 1);
  CHECK(run_cli("synth --out " + (workspace() / "bad").string() + " --train-fraction 1.5")
            .exit_code == 2);
}

TEST_CASE("train produces a monotone trace and a loadable model") {
  const fs::path out = workspace() / "train_run";
  const auto result = run_cli("train --corpus " + shared_corpus().string() + " --out " +
                              out.string() + " --k 3 --seed 9");
  REQUIRE(result.exit_code == 0);

  const HmmModel model = load_hmm(out / "model.json");
  CHECK(model.k() == 3);
  CHECK_NOTHROW(model.validate());

  const auto rows = csv_rows(out / "trace.csv");
  REQUIRE(rows.size() > 1);
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& row : rows) {
    REQUIRE(row.size() == 2);
    const double ll = to_double(row[1]);
    CHECK(ll >= prev - 1e-8);
    prev = ll;
  }
}

TEST_CASE("train with a single component matches pooled moments") {
  const fs::path out = workspace() / "train_k1";
  REQUIRE(run_cli("train --corpus " + shared_corpus().string() + " --out " + out.string() +
                  " --k 1 --seed 9")
              .exit_code == 0);
  const HmmModel model = load_hmm(out / "model.json");

  const Corpus corpus = load_corpus(shared_corpus());
  const FeatureSchema schema = FeatureSchema::with_output(corpus.schema.names());
  const auto train = project_features(corpus, schema).train_events();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(schema.dim());
  long n = 0;
  for (const auto& seq : train) {
    sum += seq.frames().colwise().sum().transpose();
    n += static_cast<long>(seq.length());
  }
  CHECK((model.components[0].mean - sum / static_cast<double>(n)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("missing inputs exit with the data error code") {
  CHECK(run_cli("train --corpus /nonexistent/dir --out " + (workspace() / "x").string())
            .exit_code == 2);
  CHECK(run_cli("decode --model /nonexistent.json --corpus " + shared_corpus().string() +
                " --event ev0001 --out " + (workspace() / "x").string())
            .exit_code == 2);
}

TEST_CASE("select-k writes both table forms with the parameter count column") {
  const fs::path out = workspace() / "scan";
  REQUIRE(run_cli("select-k --corpus " + shared_corpus().string() + " --out " + out.string() +
                  " --k-min 1 --k-max 3 --seed 4")
              .exit_code == 0);
  CHECK(fs::exists(out / "bic.txt"));

  const auto rows = csv_rows(out / "bic.csv");
  REQUIRE(rows.size() == 3);
  int best_count = 0;
  for (const auto& row : rows) {
    REQUIRE(row.size() == 4);
    const int k = static_cast<int>(to_double(row[0]));
    CHECK(static_cast<int>(to_double(row[1])) == bic_param_count(k, 4));
    best_count += row[3] == "1";
  }
  CHECK(best_count == 1);
}

TEST_CASE("decode emits normalized belief rows") {
  const fs::path out = workspace() / "decode";
  REQUIRE(run_cli("decode --model " + (shared_corpus() / "truth_model.json").string() +
                  " --corpus " + shared_corpus().string() + " --event ev0003 --out " +
                  out.string())
              .exit_code == 0);
  const auto rows = csv_rows(out / "decode_ev0003.csv");
  REQUIRE(rows.size() == 50);
  for (const auto& row : rows) {
    REQUIRE(row.size() == 2 + 3 + 2);  // frame, timestamp, h1..h3, row_sum, state
    CHECK(std::abs(to_double(row[5]) - 1.0) < 1e-10);
    const int state = static_cast<int>(to_double(row[6]));
    CHECK(state >= 1);
    CHECK(state <= 3);
  }
  CHECK(fs::exists(out / "decode_ev0003.txt"));
}

TEST_CASE("decode with a single-state model pins the dominant state at one") {
  const Corpus corpus = load_corpus(shared_corpus());
  TrainingConfig config;
  config.k = 1;
  const auto [model, trace] =
      fit_hmm(project_features(corpus, FeatureSchema::with_output(corpus.schema.names()))
                  .train_events(),
              config);
  const fs::path model_path = workspace() / "k1.json";
  save_model(model_path, model);

  const fs::path out = workspace() / "decode_k1";
  REQUIRE(run_cli("decode --model " + model_path.string() + " --corpus " +
                  shared_corpus().string() + " --event ev0002 --out " + out.string())
              .exit_code == 0);
  for (const auto& row : csv_rows(out / "decode_ev0002.csv"))
    CHECK(row.back() == "1");
}

TEST_CASE("predict writes the point estimate as the belief-weighted mixture mean") {
  const fs::path out = workspace() / "pred";
  REQUIRE(run_cli("predict --model " + (shared_corpus() / "truth_model.json").string() +
                  " --corpus " + shared_corpus().string() + " --events ev0001 --out " +
                  out.string())
              .exit_code == 0);
  const auto rows = csv_rows(out / "pred_ev0001.csv");
  REQUIRE(rows.size() == 50);
  for (const auto& row : rows) {
    // frame, ts, pred, ref, h1..h3, mu1..mu3
    REQUIRE(row.size() == 10);
    const double point = to_double(row[2]);
    double mixed = 0.0;
    for (int c = 0; c < 3; ++c)
      mixed += to_double(row[4 + c]) * to_double(row[7 + c]);
    CHECK(std::abs(point - mixed) < 1e-9);
  }
}

TEST_CASE("a malformed model document is a data error") {
  const fs::path bad = workspace() / "broken.json";
  std::ofstream(bad) << "{\"format\": \"hmmgmr-model\", \"version\": 1}";
  CHECK(run_cli("predict --model " + bad.string() + " --corpus " + shared_corpus().string() +
                " --out " + (workspace() / "x").string())
            .exit_code == 2);
}

TEST_CASE("numerically impossible inputs are a numeric failure") {
  Corpus corpus = load_corpus(shared_corpus());
  HmmModel far = load_hmm(shared_corpus() / "truth_model.json");
  for (auto& g : far.components) g.mean.array() += 1e200;
  const fs::path model_path = workspace() / "far.json";
  // bypass save_model validation on purpose: the document itself is valid
  save_model(model_path, far);
  CHECK(run_cli("decode --model " + model_path.string() + " --corpus " +
                shared_corpus().string() + " --event ev0001 --out " +
                (workspace() / "x").string())
            .exit_code == 3);
}

TEST_CASE("evaluate writes identical bytes on a rerun") {
  const fs::path out_a = workspace() / "eval_a";
  const fs::path out_b = workspace() / "eval_b";
  const std::string args = "evaluate --corpus " + shared_corpus().string() +
                           " --k 2 --seed 3 --comparison --out ";
  REQUIRE(run_cli(args + out_a.string()).exit_code == 0);
  REQUIRE(run_cli(args + out_b.string()).exit_code == 0);
  CHECK(read_file(out_a / "table_approaches.csv") == read_file(out_b / "table_approaches.csv"));
  CHECK(read_file(out_a / "table_approaches.txt") == read_file(out_b / "table_approaches.txt"));

  const auto rows = csv_rows(out_a / "table_approaches.csv");
  CHECK(rows.size() == 4);
}

TEST_CASE("evaluate runs the variable sweep when feature sets are given") {
  const fs::path out = workspace() / "eval_sweep";
  REQUIRE(run_cli("evaluate --corpus " + shared_corpus().string() + " --k 2 --seed 3" +
                  " --feature-sets \"dv_lead,dx_lag,vx_ego;vx_ego\" --out " + out.string())
              .exit_code == 0);
  const auto rows = csv_rows(out / "table_variables.csv");
  REQUIRE(rows.size() == 2);
  // sorted by mean skill, best first
  CHECK(to_double(rows[0][7]) >= to_double(rows[1][7]));
}

TEST_CASE("state ranges bracket the generator means and flag unvisited states") {
  const fs::path out = workspace() / "ranges";
  REQUIRE(run_cli("state-ranges --model " + (shared_corpus() / "truth_model.json").string() +
                  " --corpus " + shared_corpus().string() + " --out " + out.string())
              .exit_code == 0);

  const HmmModel truth = load_hmm(shared_corpus() / "truth_model.json");
  const auto rows = csv_rows(out / "state_ranges.csv");
  REQUIRE(rows.size() == 9);  // 3 states x 3 input features
  const auto input_names = truth.schema.input_names();
  for (const auto& row : rows) {
    REQUIRE(row.size() == 6);
    if (row[5] == "0") continue;  // unvisited
    const int state = static_cast<int>(to_double(row[0])) - 1;
    const auto feature = std::find(input_names.begin(), input_names.end(), row[1]);
    REQUIRE(feature != input_names.end());
    const int in_pos = static_cast<int>(feature - input_names.begin());
    const double mean = truth.components[static_cast<std::size_t>(state)].mean(
        truth.schema.input_indices()[static_cast<std::size_t>(in_pos)]);
    CHECK(to_double(row[2]) <= mean);
    CHECK(to_double(row[3]) >= mean);
  }

  // a model whose later components sit far from the data is never dominant there
  HmmModel lopsided = truth;
  lopsided.components[1].mean.array() += 1e3;
  lopsided.components[2].mean.array() += 1e3;
  const fs::path model_path = workspace() / "lopsided.json";
  save_model(model_path, lopsided);
  const fs::path out2 = workspace() / "ranges_unvisited";
  REQUIRE(run_cli("state-ranges --model " + model_path.string() + " --corpus " +
                  shared_corpus().string() + " --out " + out2.string())
              .exit_code == 0);
  const auto rows2 = csv_rows(out2 / "state_ranges.csv");
  bool saw_unvisited = false;
  for (const auto& row : rows2) saw_unvisited = saw_unvisited || row[5] == "0";
  CHECK(saw_unvisited);
  CHECK(read_file(out2 / "state_ranges.txt").find("unvisited") != std::string::npos);
}

TEST_CASE("output files carry the audit header block") {
  for (const char* file : {"corpus/events.csv", "corpus/manifest.txt"}) {
    const std::string content = read_file(workspace() / file);
    CHECK(content.rfind("# hmmgmr", 0) == 0);
    CHECK(content.find("seed: 5") != std::string::npos);
  }
}

TEST_CASE("ingest builds an aligned corpus from tracks and labels") {
  // two merge events over three constant-velocity vehicles
  std::ostringstream tracks;
  tracks << "track_id,frame_id,timestamp_ms,agent_type,x,y,vx,vy,psi_rad,length,width\n";
  for (int i = 0; i <= 30; ++i) {
    const auto ts = 100 * i;
    const double t = 0.1 * i;
    tracks << "1," << i << "," << ts << ",car," << 200.0 - 8.0 * t << ",0,-8.0,0.4,0,4.2,1.8\n";
    tracks << "2," << i << "," << ts << ",car," << 170.0 - 9.5 * t << ",0,-9.5,0.0,0,4.6,1.9\n";
    tracks << "3," << i << "," << ts << ",truck," << 230.0 - 7.0 * t << ",0,-7.0,0.0,0,8.0,2.4\n";
  }
  const fs::path tracks_path = workspace() / "tracks.csv";
  std::ofstream(tracks_path) << tracks.str();

  const fs::path labels_path = workspace() / "labels.csv";
  std::ofstream(labels_path) << "event_id,ego_id,lead_id,lag_id,t_s,t_e\n"
                             << "m1,1,2,3,0,1500\nm2,1,2,3,1500,3000\n";

  const fs::path out = workspace() / "ingested";
  const auto result =
      run_cli("ingest --tracks " + tracks_path.string() + " --labels " + labels_path.string() +
              " --out " + out.string() + " --align-len 12 --seed 3");
  REQUIRE(result.exit_code == 0);

  const Corpus corpus = load_corpus(out);
  REQUIRE(corpus.events.size() == 2);
  CHECK(corpus.events[0].length() == 12);
  CHECK(corpus.schema.names() ==
        std::vector<std::string>({"dv_lead", "dx_lag", "vx_ego", "vy_ego"}));
  // constant kinematics survive alignment exactly
  CHECK((corpus.events[0].frames().col(0).array() - (-1.5)).abs().maxCoeff() < 1e-9);
  CHECK((corpus.events[0].frames().col(2).array() - (-8.0)).abs().maxCoeff() < 1e-9);
  CHECK(corpus.split.train_ids.size() == 1);
  CHECK(corpus.split.test_ids.size() == 1);
}

TEST_CASE("a config file supplies defaults that flags override") {
  const fs::path cfg = workspace() / "synth.ini";
  std::ofstream(cfg) << "[synth]\nevents=7\nlen=15\nseed=2\n";
  const fs::path out = workspace() / "from_config";
  REQUIRE(run_cli("--config " + cfg.string() + " synth --out " + out.string() +
                  " --events 9")
              .exit_code == 0);
  CHECK(load_corpus(out).events.size() == 9);  // flag beats config
  CHECK(load_corpus(out).events[0].length() == 15);
}

TEST_CASE("state ranges with a single-state model are the global extrema") {
  const Corpus corpus = load_corpus(shared_corpus());
  TrainingConfig config;
  config.k = 1;
  const FeatureSchema schema = FeatureSchema::with_output(corpus.schema.names());
  const auto [model, trace] = fit_hmm(project_features(corpus, schema).train_events(), config);
  const fs::path model_path = workspace() / "k1_ranges.json";
  save_model(model_path, model);

  const fs::path out = workspace() / "ranges_k1";
  REQUIRE(run_cli("state-ranges --model " + model_path.string() + " --corpus " +
                  shared_corpus().string() + " --out " + out.string())
              .exit_code == 0);
  const auto rows = csv_rows(out / "state_ranges.csv");
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    const int col = corpus.schema.index_of(row[1]);
    REQUIRE(col >= 0);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& seq : corpus.events) {
      lo = std::min(lo, seq.frames().col(col).minCoeff());
      hi = std::max(hi, seq.frames().col(col).maxCoeff());
    }
    CHECK(to_double(row[2]) == doctest::Approx(lo).epsilon(1e-12));
    CHECK(to_double(row[3]) == doctest::Approx(hi).epsilon(1e-12));
  }
}

}  // TEST_SUITE
