#include "doctest_torch.hpp"

#include "fexgan/config.hpp"
#include "fexgan/errors.hpp"

using namespace fexgan;

TEST_SUITE("config") {

TEST_CASE("defaults") {
  TrainConfig c;
  CHECK(c.learning_rate == 2e-4);
  CHECK(c.batch_size == 32);
  CHECK(c.beta1 == 0.5);
  CHECK(c.beta2 == 0.999);
  CHECK(c.weights.alpha == 1.0);
  CHECK(c.weights.beta == 0.1);
  CHECK(c.weights.gamma == 10.0);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("text round trip is exact") {
  TrainConfig c;
  c.encoder_channels = {16, 32, 64, 128, 128, 128};
  c.learning_rate = 1.0 / 3.0;
  c.noise_scale = 0.1 + 0.2;
  c.seed = 18446744073709551557ull;
  c.lambda_mode = LambdaMode::vector;
  c.corpus_root = "/data/faces";
  const auto back = TrainConfig::from_text(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.learning_rate == c.learning_rate);
  CHECK(back.noise_scale == c.noise_scale);
  CHECK(back.seed == c.seed);
  CHECK(back.lambda_mode == LambdaMode::vector);
  CHECK(back.encoder_channels == c.encoder_channels);

  TrainConfig empty_root;
  CHECK(TrainConfig::from_text(empty_root.to_text()).corpus_root.empty());
}

TEST_CASE("full-scale hyperparameters are accepted") {
  const auto c = TrainConfig::from_text("total_steps = 100000\nbatch_size = 32\nlearning_rate = 2e-4\n");
  CHECK_NOTHROW(c.validate());
  CHECK(c.total_steps == 100000);
  CHECK(c.to_text().find("total_steps = 100000\n") != std::string::npos);
  CHECK(TrainConfig::from_text(c.to_text()).learning_rate == 2e-4);
}

TEST_CASE("comments, spacing and partial files") {
  const auto c = TrainConfig::from_text("# desk run\nseed=9\n  batch_size =  4  \nencoder_channels = 8, 16,16,16,16,16\n");
  CHECK(c.seed == 9);
  CHECK(c.batch_size == 4);
  CHECK(c.encoder_channels == std::vector<int>{8, 16, 16, 16, 16, 16});
}

TEST_CASE("bad input") {
  CHECK_THROWS_WITH_AS(TrainConfig::from_text("learning_rat = 1\n"), doctest::Contains("learning_rat"), DomainError);
  CHECK_THROWS_AS(TrainConfig::from_text("batch_size = many\n"), DomainError);
  CHECK_THROWS_AS(TrainConfig::from_text("lambda_mode = both\n"), DomainError);
  CHECK_THROWS_AS(TrainConfig::from_text("encoder_channels = 8,,16\n"), DomainError);

  TrainConfig c;
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = TrainConfig{};
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = TrainConfig{};
  c.total_steps = 0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = TrainConfig{};
  c.decoder_channels = {8};
  CHECK_THROWS_AS(c.validate(), DomainError);
}

}
