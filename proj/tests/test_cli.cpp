#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <string>

#include "coreset/io.hpp"
#include "coreset/random.hpp"
#include "coreset/selection.hpp"

using namespace coreset;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "coreset_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string at(const std::string& name) { return (workdir() / name).string(); }

Run cli(const std::string& args, const std::string& env = "") {
  const auto out = at("stdout.txt"), err = at("stderr.txt");
  const std::string cmd = env + " " + CORESET_CLI_PATH + " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

void write_fixtures() {
  Rng rng(21);
  const std::size_t n = 300;
  std::vector<double> s(n);
  std::vector<std::uint32_t> labels(n);
  std::vector<std::uint64_t> ids(n);
  std::vector<float> emb(n * 4), eval(120 * 4);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.uniform();
    labels[i] = static_cast<std::uint32_t>(rng.below(3));
    ids[i] = 1000 + i;
  }
  for (auto& v : emb) v = static_cast<float>(rng.normal());
  for (auto& v : eval) v = static_cast<float>(rng.normal());
  save_scores(ScoreTable(ids, labels, s, ScoreKind::el2n), at("s.csv"), ScoreFormat::csv);
  save_embeddings(EmbeddingMatrix(n, 4, emb, ids), at("train.bin"));
  save_embeddings(EmbeddingMatrix(120, 4, eval), at("eval.bin"));
  write_file_atomic(at("exclude.txt"), "0\n7\n");
}

struct Fixtures {
  Fixtures() { write_fixtures(); }
};
const Fixtures fixtures;

}  // namespace

TEST_CASE("select happy path") {
  auto r = cli("select --method ccs --scores " + at("s.csv") +
               " --alpha 0.9 --beta 0.3 --strata 50 --seed 1 --out " + at("c.json"));
  REQUIRE(r.code == 0);
  auto sel = load_selection(at("c.json"));
  CHECK(sel.method == "ccs");
  CHECK(sel.size() == 30);
  CHECK(sel.source_n == 300);
  CHECK(std::get<std::uint64_t>(sel.params.at("seed")) == 1);
  CHECK(sel.selected ==
        run_selector({Method::ccs, 0.9, 0.3, 50, 1}, load_scores(at("s.csv"))).selected);
}

TEST_CASE("lower-is-harder scores are canonicalized before selection") {
  const auto raw = load_scores(at("s.csv"));
  std::vector<double> s(raw.scores().begin(), raw.scores().end());
  for (auto& v : s) v = -v;
  const ScoreTable flipped(std::vector<std::uint64_t>(raw.ids().begin(), raw.ids().end()),
                           std::vector<std::uint32_t>(raw.labels().begin(), raw.labels().end()),
                           s, ScoreKind::aum, Orientation::lower_is_harder);
  save_scores(flipped, at("aum.csv"), ScoreFormat::csv);
  REQUIRE(cli("select --method topk-hard --scores " + at("aum.csv") + " --alpha 0.9 --out " +
              at("t1.json"))
              .code == 0);
  REQUIRE(cli("select --method topk-hard --scores " + at("s.csv") + " --alpha 0.9 --out " +
              at("t2.json"))
              .code == 0);
  CHECK(load_selection(at("t1.json")).selected == load_selection(at("t2.json")).selected);
}

TEST_CASE("every method runs from the command line") {
  const std::string scores = " --scores " + at("s.csv") + " --alpha 0.5 --out " + at("m.json");
  for (std::string m : {"random", "topk-hard", "prune-hard", "stratified", "ccs"}) {
    CHECK(cli("select --method " + m + scores).code == 0);
    CHECK(load_selection(at("m.json")).size() == 150);
  }
  CHECK(cli("select --method moderate --embeddings " + at("train.bin") + scores).code == 0);
  CHECK(load_selection(at("m.json")).method == "moderate");
  // Canonical scores in [0, 1) leave a non-positive raw maximum.
  auto imp = cli("select --method importance" + scores);
  CHECK(imp.code == 2);
  CHECK(imp.err.find("non-positive score maximum") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
  auto r = cli("select --method kcenter --scores " + at("s.csv") + " --alpha 0.5 --out " +
               at("x.json"));
  CHECK(r.code == 1);
  CHECK(r.err.find("kcenter") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK_FALSE(fs::exists(at("x.json")));

  CHECK(cli("select --method random --beta 0.1 --scores " + at("s.csv") + " --alpha 0.5 --out " +
            at("x.json"))
            .code == 1);
  CHECK(cli("select --method random --embeddings " + at("train.bin") + " --scores " +
            at("s.csv") + " --alpha 0.5 --out " + at("x.json"))
            .code == 1);
  CHECK(cli("select --method moderate --scores " + at("s.csv") + " --alpha 0.5 --out " +
            at("x.json"))
            .code == 1);
  CHECK(cli("select --method ccs --scores " + at("s.csv") + " --alpha 0.3 --beta 0.5 --out " +
            at("x.json"))
            .code == 1);
  CHECK(cli("select --scores " + at("s.csv")).code == 1);
  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("").code == 1);
  CHECK(cli("--log-level loud inspect --scores " + at("s.csv")).code == 1);
  CHECK_FALSE(fs::exists(at("x.json")));
}

TEST_CASE("data errors exit 2 and name the culprit") {
  auto missing = cli("select --method random --scores " + at("nope.csv") +
                     " --alpha 0.5 --out " + at("x.json"));
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.csv") != std::string::npos);

  write_file_atomic(at("dup.csv"), "id,label,score\n0,1,0.5\n0,0,2.0\n");
  auto dup = cli("select --method random --scores " + at("dup.csv") + " --alpha 0.5 --out " +
                 at("x.json"));
  CHECK(dup.code == 2);
  CHECK(dup.err.find("line 3") != std::string::npos);

  auto nodir = cli("select --method random --scores " + at("s.csv") + " --alpha 0.5 --out " +
                   at("no/such/dir/x.json"));
  CHECK(nodir.code == 2);
  CHECK(nodir.err.find("--out") != std::string::npos);

  write_file_atomic(at("short.bin"), read_file(at("eval.bin")).substr(0, 100));
  auto trunc = cli("coverage --train-emb " + at("train.bin") + " --eval-emb " + at("short.bin") +
                   " --selection " + at("c.json"));
  CHECK(trunc.code == 2);
  CHECK(trunc.err.find("short.bin") != std::string::npos);
  CHECK_FALSE(fs::exists(at("x.json")));
}

TEST_CASE("coverage outputs") {
  REQUIRE(cli("select --method random --scores " + at("s.csv") + " --alpha 0.8 --out " +
              at("r.json"))
              .code == 0);
  auto r = cli("coverage --train-emb " + at("train.bin") + " --eval-emb " + at("eval.bin") +
               " --selection " + at("r.json") + " --selection " + at("c.json") + " --exclude " +
               at("exclude.txt"));
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string header, first, second;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(header == "method,alpha,coreset_size,auc_pr");
  CHECK(first.rfind("random,0.80000000000000004,60,", 0) == 0);
  CHECK(second.rfind("ccs,0.90000000000000002,30,", 0) == 0);

  auto one = cli("coverage --train-emb " + at("train.bin") + " --eval-emb " + at("eval.bin") +
                 " --selection " + at("r.json") + " --curve-out " + at("curve.csv") +
                 " --report-out " + at("report.json") + " --out " + at("table.csv"));
  REQUIRE(one.code == 0);
  const auto curve = read_file(at("curve.csv"));
  CHECK(curve.rfind("p,r\n", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 121);
  CHECK(read_file(at("report.json")).find("\"metric\": \"l2\"") != std::string::npos);
  CHECK(read_file(at("table.csv")).rfind("method,alpha,coreset_size,auc_pr\nrandom,", 0) == 0);

  CHECK(cli("coverage --train-emb " + at("train.bin") + " --eval-emb " + at("eval.bin") +
            " --selection " + at("r.json") + " --selection " + at("c.json") + " --curve-out " +
            at("curve2.csv"))
            .code == 1);
  CHECK_FALSE(fs::exists(at("curve2.csv")));
}

TEST_CASE("inspect matches partition_strata") {
  auto r = cli("inspect --scores " + at("s.csv") + " --strata 7");
  REQUIRE(r.code == 0);
  const auto table = load_scores(at("s.csv"));
  std::vector<std::size_t> all(table.size());
  std::iota(all.begin(), all.end(), 0);
  const auto part = partition_strata(table, all, 7);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "stratum,lower,upper,count,density");
  for (std::size_t j = 0; j < 7; ++j) {
    REQUIRE(std::getline(lines, line));
    std::istringstream fields(line);
    std::string f[5];
    for (auto& v : f) std::getline(fields, v, ',');
    CHECK(std::stoul(f[0]) == j);
    CHECK(std::stod(f[1]) == part.edges[j]);
    CHECK(std::stod(f[2]) == part.edges[j + 1]);
    CHECK(std::stoul(f[3]) == part.members[j].size());
    CHECK(std::stod(f[4]) ==
          doctest::Approx(part.members[j].size() / (300.0 * part.width)).epsilon(1e-12));
  }
  CHECK_FALSE(std::getline(lines, line));
  CHECK(cli("inspect --scores " + at("s.csv") + " --strata 0").code == 1);
}

TEST_CASE("determinism") {
  const std::string sel = "select --method ccs --scores " + at("s.csv") +
                          " --alpha 0.7 --beta 0.2 --strata 10 --seed 5 --out ";
  REQUIRE(cli(sel + at("d1.json")).code == 0);
  REQUIRE(cli("--threads 4 " + sel + at("d2.json")).code == 0);
  CHECK(read_file(at("d1.json")) == read_file(at("d2.json")));

  const std::string cov = "coverage --train-emb " + at("train.bin") + " --eval-emb " +
                          at("eval.bin") + " --selection " + at("d1.json") + " --curve-out ";
  REQUIRE(cli("--threads 1 " + cov + at("k1.csv")).code == 0);
  REQUIRE(cli("--threads 3 " + cov + at("k3.csv")).code == 0);
  CHECK(read_file(at("k1.csv")) == read_file(at("k3.csv")));

  auto stamped = cli(sel + at("d3.json"), "SOURCE_DATE_EPOCH=86400");
  REQUIRE(stamped.code == 0);
  CHECK(load_selection(at("d3.json")).created_at == "1970-01-02T00:00:00Z");
}

TEST_CASE("bench and version") {
  const std::string bench =
      "bench --preset separable --methods random,ccs --alphas 0.5 --betas 0,0.2 --seeds 0,1 "
      "--strata 5 --out ";
  REQUIRE(cli("--threads 1 " + bench + at("b1.csv")).code == 0);
  REQUIRE(cli("--threads 2 " + bench + at("b2.csv") + " --beta-search " + at("bs.csv")).code == 0);
  const auto csv = read_file(at("b1.csv"));
  CHECK(csv == read_file(at("b2.csv")));
  CHECK(csv.rfind("method,alpha,beta,k,seed,accuracy,auc_pr\nrandom,0.5,0,0,0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 + 4);
  CHECK(read_file(at("bs.csv")).rfind("alpha,k,beta,median_accuracy,best\n0.5,5,0,", 0) == 0);
  CHECK(cli(bench + at("b3.csv") + " --classifier svm").code == 1);
  CHECK(cli("bench --preset cifar --out " + at("b3.csv")).code == 1);

  auto v = cli("--version");
  CHECK(v.code == 0);
  CHECK(v.out.find("0.1.0") != std::string::npos);
  CHECK(v.out.find("embedding format 1") != std::string::npos);
  CHECK(cli("--help").code == 0);
}
