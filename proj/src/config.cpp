#include "fexgan/config.hpp"

#include <boost/program_options.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

#include "fexgan/errors.hpp"

namespace po = boost::program_options;

namespace fexgan {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, end};
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first == std::string::npos) throw DomainError("empty entry in list '" + s + "'");
    item = item.substr(first, last - first + 1);
    int v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || ptr != item.data() + item.size()) {
      throw DomainError("bad integer '" + item + "' in list '" + s + "'");
    }
    out.push_back(v);
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be > 0");
  if (batch_size < 2) throw DomainError("batch_size must be >= 2");
  if (total_steps < 1) throw DomainError("total_steps must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw DomainError("adam betas must lie in [0, 1)");
  }
  weights.validate();
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw DomainError("val_fraction must lie in (0, 1)");
  if (!(noise_scale >= 0.0)) throw DomainError("noise_scale must be >= 0");
  if (disc_steps_per_gen_step < 1) throw DomainError("disc_steps_per_gen_step must be >= 1");
  if (checkpoint_every < 0 || log_every < 0) throw DomainError("checkpoint_every/log_every must be >= 0");
  generator_config().validate();
  disc_config().validate();
}

GeneratorConfig TrainConfig::generator_config() const {
  GeneratorConfig g;
  g.image_size = image_size;
  g.latent_dim = latent_dim;
  g.encoder_channels = encoder_channels;
  g.decoder_channels = decoder_channels;
  g.latent_dense = latent_dense;
  g.affect_dense = affect_dense;
  g.activation_slope = activation_slope;
  return g;
}

DiscConfig TrainConfig::disc_config() const {
  DiscConfig d;
  d.image_size = image_size;
  d.channels = disc_channels;
  d.activation_slope = activation_slope;
  return d;
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out << "learning_rate = " << format_double(learning_rate) << '\n'
      << "batch_size = " << batch_size << '\n'
      << "total_steps = " << total_steps << '\n'
      << "beta1 = " << format_double(beta1) << '\n'
      << "beta2 = " << format_double(beta2) << '\n'
      << "seed = " << seed << '\n'
      << "alpha = " << format_double(weights.alpha) << '\n'
      << "beta = " << format_double(weights.beta) << '\n'
      << "gamma = " << format_double(weights.gamma) << '\n'
      << "corpus_root = " << corpus_root << '\n'
      << "output_dir = " << output_dir << '\n'
      << "val_fraction = " << format_double(val_fraction) << '\n'
      << "noise_scale = " << format_double(noise_scale) << '\n'
      << "lambda_mode = " << (lambda_mode == LambdaMode::scalar ? "scalar" : "vector") << '\n'
      << "disc_steps_per_gen_step = " << disc_steps_per_gen_step << '\n'
      << "checkpoint_every = " << checkpoint_every << '\n'
      << "log_every = " << log_every << '\n'
      << "image_size = " << image_size << '\n'
      << "latent_dim = " << latent_dim << '\n'
      << "encoder_channels = " << join_ints(encoder_channels) << '\n'
      << "decoder_channels = " << join_ints(decoder_channels) << '\n'
      << "latent_dense = " << latent_dense << '\n'
      << "affect_dense = " << affect_dense << '\n'
      << "disc_channels = " << join_ints(disc_channels) << '\n'
      << "activation_slope = " << format_double(activation_slope) << '\n';
  return out.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig c;
  std::string lambda_mode = "scalar";
  std::string enc = join_ints(c.encoder_channels);
  std::string dec = join_ints(c.decoder_channels);
  std::string disc = join_ints(c.disc_channels);

  po::options_description desc;
  desc.add_options()
      ("learning_rate", po::value(&c.learning_rate))
      ("batch_size", po::value(&c.batch_size))
      ("total_steps", po::value(&c.total_steps))
      ("beta1", po::value(&c.beta1))
      ("beta2", po::value(&c.beta2))
      ("seed", po::value(&c.seed))
      ("alpha", po::value(&c.weights.alpha))
      ("beta", po::value(&c.weights.beta))
      ("gamma", po::value(&c.weights.gamma))
      ("corpus_root", po::value(&c.corpus_root))
      ("output_dir", po::value(&c.output_dir))
      ("val_fraction", po::value(&c.val_fraction))
      ("noise_scale", po::value(&c.noise_scale))
      ("lambda_mode", po::value(&lambda_mode))
      ("disc_steps_per_gen_step", po::value(&c.disc_steps_per_gen_step))
      ("checkpoint_every", po::value(&c.checkpoint_every))
      ("log_every", po::value(&c.log_every))
      ("image_size", po::value(&c.image_size))
      ("latent_dim", po::value(&c.latent_dim))
      ("encoder_channels", po::value(&enc))
      ("decoder_channels", po::value(&dec))
      ("latent_dense", po::value(&c.latent_dense))
      ("affect_dense", po::value(&c.affect_dense))
      ("disc_channels", po::value(&disc))
      ("activation_slope", po::value(&c.activation_slope));

  std::istringstream in(text);
  po::variables_map vm;
  try {
    po::store(po::parse_config_file(in, desc), vm);
    po::notify(vm);
  } catch (const po::error& e) {
    throw DomainError(std::string("config: ") + e.what());
  }
  if (lambda_mode == "scalar") {
    c.lambda_mode = LambdaMode::scalar;
  } else if (lambda_mode == "vector") {
    c.lambda_mode = LambdaMode::vector;
  } else {
    throw DomainError("config: lambda_mode must be 'scalar' or 'vector', got '" + lambda_mode + "'");
  }
  c.encoder_channels = parse_int_list(enc);
  c.decoder_channels = parse_int_list(dec);
  c.disc_channels = parse_int_list(disc);
  return c;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace fexgan
