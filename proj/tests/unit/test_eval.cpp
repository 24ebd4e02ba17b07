#include "doctest_torch.hpp"

#include <fstream>
#include <set>

#include "fexgan/errors.hpp"
#include "fexgan/eval.hpp"
#include "fexgan/tensor_image.hpp"
#include "fixtures.hpp"

using namespace fexgan;
using fexgan::testing::TempDir;

namespace {

// Images carry their own label: channel 0 at (0, 0) holds class / 10 and
// channel 1 holds 1 for real, 0 for generated.
class LabelStub : public InferenceModel {
 public:
  explicit LabelStub(bool invert) : invert_(invert) {}
  int image_size() const override { return 8; }
  int latent_dim() const override { return 2; }
  LatentDistribution encode(const torch::Tensor& images, const torch::Tensor&) const override {
    return {torch::zeros({images.size(0), 2}), torch::zeros({images.size(0), 2})};
  }
  torch::Tensor decode(const torch::Tensor& z, const torch::Tensor& affects) const override {
    auto out = torch::zeros({z.size(0), 3, 8, 8});
    out.select(1, 0).select(1, 0).select(1, 0).copy_(affects.argmax(1).to(torch::kFloat32) / 10.0);
    return out;
  }
  DiscOutput discriminate(const torch::Tensor& images) const override {
    const auto cls = (images.select(1, 0).select(1, 0).select(1, 0) * 10.0).round().to(torch::kInt64);
    auto real = images.select(1, 1).select(1, 0).select(1, 0) > 0.5;
    if (invert_) real = real.logical_not();
    return {torch::where(real, torch::full({images.size(0)}, 0.9), torch::full({images.size(0)}, 0.1)),
            torch::one_hot(cls, 7).to(torch::kFloat32)};
  }

 private:
  bool invert_;
};

LabeledImages labelled_set(int n) {
  LabeledImages set;
  set.images = torch::zeros({n, 3, 8, 8});
  for (int i = 0; i < n; ++i) {
    const Affect a = affect_from_id(i % 7);
    set.labels.push_back(a);
    set.identities.push_back(i % 3);
    set.images[i][0][0][0] = affect_id(a) / 10.0;
    set.images[i][1][0][0] = 1.0;
  }
  return set;
}

std::shared_ptr<NetworkModel> untrained() {
  auto [g, d] = build_models(testing::tiny_config());
  return std::make_shared<NetworkModel>(g, d);
}

std::vector<NeutralSource> tiny_sources() {
  const auto data = testing::tiny_data();
  const auto set = LabeledImages::from(data->val_images, data->val);
  const std::vector<int> ids{0, 1};
  return neutral_sources(set, ids);
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("an echoing predictor scores perfectly") {
  const LabelStub echo(false);
  const auto set = labelled_set(50);
  const auto t = accuracy_table(echo, set, labelled_set(20));
  for (const auto& a : {t.train_real, t.train_fake, t.val_real, t.val_fake}) {
    CHECK(a.binary == 1.0);
    CHECK(a.multi == 1.0);
  }
  const auto csv = t.to_csv();
  CHECK(csv.rfind("split,source,binary,multi\n", 0) == 0);
  CHECK(csv.find("val,fake,1.000000,1.000000") != std::string::npos);
}

TEST_CASE("an inverting predictor gets every binary call wrong") {
  const LabelStub inv(true);
  const auto t = accuracy_table(inv, labelled_set(30), labelled_set(30));
  for (const auto& a : {t.train_real, t.train_fake, t.val_real, t.val_fake}) CHECK(a.binary == 0.0);
}

TEST_CASE("empty sets are rejected") {
  const LabelStub echo(false);
  CHECK_THROWS_AS(real_accuracy(echo, LabeledImages{}), DomainError);
  CHECK_THROWS_AS(fake_accuracy(echo, LabeledImages{}, 1), DomainError);
}

TEST_CASE("diversity score") {
  CHECK(diversity_score(torch::ones({4, 3, 2, 2})) == 0.0);
  auto pair = torch::stack({torch::ones({3, 4, 4}), -torch::ones({3, 4, 4})});
  CHECK(diversity_score(pair) == doctest::Approx(2.0));
  const auto x = torch::rand({6, 3, 4, 4});
  const double base = diversity_score(x);
  CHECK(diversity_score(x.index_select(0, torch::tensor({5, 2, 0, 4, 1, 3}, torch::kInt64))) ==
        doctest::Approx(base).epsilon(1e-12));
  CHECK(diversity_score(x * 3.0) == doctest::Approx(3.0 * base).epsilon(1e-6));
  CHECK_THROWS_AS(diversity_score(torch::ones({1, 3, 2, 2})), DomainError);
}

TEST_CASE("random grid") {
  const auto model = untrained();
  TempDir dir("grid");
  const auto g = random_grid(*model, 64, 5);
  CHECK(g.rows == 8);
  CHECK(g.cols == 8);
  REQUIRE(g.meta.size() == 64);
  std::set<std::vector<std::uint8_t>> distinct;
  for (int i = 0; i < 64; ++i) distinct.insert(to_image(g.cells[i]).pixels);
  CHECK(distinct.size() == 64);

  g.write(dir / "a.png");
  random_grid(*model, 64, 5).write(dir / "b.png");
  CHECK(read_png(dir / "a.png") == read_png(dir / "b.png"));
  CHECK(encode_png(read_png(dir / "a.png")) == encode_png(read_png(dir / "b.png")));
  std::ifstream tsv(dir / "a.tsv");
  std::string line;
  int lines = 0;
  while (std::getline(tsv, line)) ++lines;
  CHECK(lines == 65);

  const auto one = random_grid(*model, 1, 5);
  CHECK(one.rows == 1);
  CHECK(one.cols == 1);
  CHECK(one.image().width == 32);
  CHECK_THROWS_AS(random_grid(*model, 0, 5), DomainError);
  const auto five = random_grid(*model, 5, 5);
  CHECK(five.rows * five.cols >= 5);
  CHECK(five.image().width == 3 * 32 + 2 * 2);
}

TEST_CASE("transform grid layout") {
  const auto model = untrained();
  const auto g = transform_grid(*model, tiny_sources());
  CHECK(g.grid.rows == 2);
  CHECK(g.grid.cols == 7);
  CHECK(g.grid.cells.size(0) == 14);
  CHECK(g.agreement >= 0.0);
  CHECK(g.agreement <= 1.0);
  CHECK(g.grid.meta[8].label == "identity 1 joy");
  CHECK(torch::equal(transform_grid(*model, tiny_sources()).grid.cells, g.grid.cells));

  const auto data = testing::tiny_data();
  const auto set = LabeledImages::from(data->val_images, data->val);
  const std::vector<int> ids{0, 9};
  CHECK_THROWS_WITH_AS(neutral_sources(set, ids), doctest::Contains("identity 9"), DomainError);
  CHECK_THROWS_AS(transform_grid(*model, std::span<const NeutralSource>{}), DomainError);
}

TEST_CASE("hybrid grid") {
  const auto model = untrained();
  const auto blends = default_hybrids();
  const auto g = hybrid_grid(*model, tiny_sources(), blends);
  CHECK(g.grid.rows == 2);
  CHECK(g.grid.cols == 3);
  CHECK(g.grid.meta[0].label.find("anger") != std::string::npos);

  std::vector<BlendSpec> pure = blends;
  for (auto& b : pure) b.weights.begin()->second = 1.0, std::next(b.weights.begin())->second = 0.0;
  const auto h = hybrid_grid(*model, tiny_sources(), pure);
  const auto t = transform_grid(*model, tiny_sources());
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) {
      const Affect a = pure[c].weights.begin()->first;
      CHECK(torch::allclose(h.grid.cells[r * 3 + c], t.grid.cells[r * 7 + affect_id(a)], 1e-5, 1e-6));
    }
  }
  CHECK_THROWS_AS(hybrid_grid(*model, tiny_sources(), std::span<const BlendSpec>{}), DomainError);
}

}
