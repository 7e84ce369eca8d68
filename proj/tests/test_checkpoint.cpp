#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dcdm/checkpoint.hpp"
#include "dcdm/train.hpp"
#include "model_fixtures.hpp"

using namespace dcdm;
using namespace dcdm::testing;

namespace {

std::vector<Dialogue> toy_corpus(const ModelConfig& c, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Dialogue> out;
  for (int i = 0; i < n; ++i) out.push_back(random_dialogue(rng, c, 3 + i % 4, "d" + std::to_string(i)));
  return out;
}

TrainOptions toy_options(int epochs) {
  TrainOptions o;
  o.epochs = epochs;
  o.batch_size = 3;
  o.seed = 11;
  return o;
}

std::string bytes_of(const Checkpoint& ckpt) {
  std::ostringstream out;
  write_checkpoint(out, ckpt);
  return out.str();
}

Checkpoint snapshot(const Trainer& t) { return {"seed = 11\n", t.model().parameters().names(), t.state()}; }

}  // namespace

TEST_CASE("write, read, write is byte-identical") {
  const ModelConfig c = toy_config();
  const auto train = toy_corpus(c, 7, 1), val = toy_corpus(c, 3, 2);
  Trainer t(c, toy_options(2));
  t.fit(train, val);
  const Checkpoint ckpt = snapshot(t);
  const std::string first = bytes_of(ckpt);
  std::istringstream in(first);
  const Checkpoint back = read_checkpoint(in);
  CHECK(back == ckpt);
  CHECK(bytes_of(back) == first);
  CHECK(first.compare(0, 8, "DCDMCKPT") == 0);
}

TEST_CASE("bad headers and truncation") {
  const ModelConfig c = toy_config();
  Trainer t(c, toy_options(1));
  const std::string good = bytes_of(snapshot(t));

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  std::istringstream a(bad_magic);
  CHECK_THROWS_AS(read_checkpoint(a), VersionError);

  std::string bad_version = good;
  bad_version[8] = char(kCheckpointVersion + 1);
  std::istringstream b(bad_version);
  CHECK_THROWS_AS(read_checkpoint(b), VersionError);

  for (std::size_t cut : {std::size_t(4), std::size_t(20), good.size() / 2, good.size() - 1}) {
    std::istringstream in(good.substr(0, cut));
    CHECK_THROWS_AS(read_checkpoint(in), ValidationError);
  }
  std::istringstream trailing(good + "x");
  CHECK_THROWS_AS(read_checkpoint(trailing), ValidationError);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/x.ckpt"), IoError);
}

TEST_CASE("restore by name checks shapes") {
  const ModelConfig c = toy_config();
  Trainer t(c, toy_options(1));
  t.fit(toy_corpus(c, 4, 3), {});
  const Checkpoint ckpt = snapshot(t);
  Model fresh(c);
  restore_parameters(fresh.parameters(), ckpt);
  CHECK(fresh.parameters().values() == t.model().parameters().values());

  ModelConfig wider = c;
  wider.s_dim = 4;
  Model other(wider);
  CHECK_THROWS_AS(restore_parameters(other.parameters(), ckpt), DimensionError);
}

TEST_CASE("resuming from disk equals an uninterrupted run") {
  const ModelConfig c = toy_config();
  const auto train = toy_corpus(c, 9, 4), val = toy_corpus(c, 3, 5);

  Trainer whole(c, toy_options(5));
  const auto full_log = whole.fit(train, val);

  Trainer first(c, toy_options(2));
  auto log = first.fit(train, val);
  const auto dir = std::filesystem::temp_directory_path() / "dcdm_test_checkpoint";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "last.ckpt").string();
  save_checkpoint(snapshot(first), path);

  const Checkpoint loaded = load_checkpoint(path);
  Trainer second(c, toy_options(5), loaded.state);
  const auto rest = second.fit(train, val);
  log.insert(log.end(), rest.begin(), rest.end());

  REQUIRE(log.size() == full_log.size());
  for (std::size_t i = 0; i < log.size(); ++i) CHECK(log[i].to_json() == full_log[i].to_json());
  CHECK(second.state() == whole.state());
  std::filesystem::remove_all(dir);
}
