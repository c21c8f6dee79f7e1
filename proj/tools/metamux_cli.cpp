// metamux: command-line front end for the experiments.
//
//   metamux capacity --waveform rect --ebn0 0:2:20 --seed 1 --out out/
//   metamux ber --config configs/example.json
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "metamux/config.hpp"
#include "metamux/decoder.hpp"
#include "metamux/experiments.hpp"
#include "metamux/frame_io.hpp"

namespace fs = std::filesystem;
using namespace metamux;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> k;
  std::optional<std::string> waveform;
  std::optional<std::string> ebn0;
  std::optional<std::size_t> bits;
  std::optional<std::size_t> particles;
  std::optional<unsigned> threads;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config");
  cmd->add_option("--seed", f.seed, "master seed (required here or in the config)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--k", f.k, "overlap factor K");
  cmd->add_option("--waveform", f.waveform, "rect, taylor35, taylor50, gaussian, hamming");
  cmd->add_option("--ebn0", f.ebn0, "Eb/N0 grid in dB, start:step:stop");
  cmd->add_option("--bits", f.bits, "bit budget per grid point");
  cmd->add_option("--particles", f.particles, "SMC particle count");
  cmd->add_option("--threads", f.threads, "worker threads (results do not depend on it)");
  cmd->add_flag("--timing", f.timing, "add runtime columns (makes outputs run-dependent)");
}

// Defaults <- config file <- command-line flags; validated once.
ExperimentConfig build_config(const CommonFlags& f, bool capacity_mode = false) {
  nlohmann::json j = nlohmann::json::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ConfigError("config: cannot open " + f.config);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  if (f.seed) j["seed"] = *f.seed;
  if (f.out) j["out"] = *f.out;
  if (f.k) {
    j["k"] = *f.k;
    if (capacity_mode) j["capacity"]["k_list"] = {*f.k};
  }
  if (f.waveform) j["waveform"] = *f.waveform;
  if (f.ebn0) j["ebn0_db"] = *f.ebn0;
  if (f.bits) j["bits"] = *f.bits;
  if (f.particles) j["smc"]["particles"] = *f.particles;
  if (f.threads) j["threads"] = *f.threads;
  if (f.timing) j["timing"] = true;
  return parse_config(j);
}

int cmd_capacity(const CommonFlags& f) {
  const auto c = build_config(f, true);
  const auto sweep = run_capacity_sweep(c);
  save_capacity_sweep(sweep, c.out);
  std::cout << "wrote " << (fs::path(c.out) / "capacity.csv").string() << " and required_ebn0.csv ("
            << sweep.required.size() << " required-Eb/N0 rows)\n";
  return 0;
}

int cmd_ber(const CommonFlags& f) {
  const auto c = build_config(f);
  fs::create_directories(c.out);
  std::ofstream csv(fs::path(c.out) / "ber.csv");
  if (!csv) throw ConfigError("cannot write ber.csv");
  const auto recs = run_ber_sweep(c, &csv);
  for (const auto& r : recs)
    std::cout << "Eb/N0 " << r.ebn0_db << " dB: " << r.bit_errors << "/" << r.bits_sent << " (" << r.ber << ")\n";
  return 0;
}

int cmd_spectrum(const CommonFlags& f) {
  const auto c = build_config(f);
  const auto r = run_spectrum_report(c);
  save_spectrum_report(r, c, c.out);
  std::cout << to_json(r.pulse_bandwidth).dump(2) << '\n';
  return 0;
}

int cmd_share(const CommonFlags& f) {
  auto c = build_config(f);
  if (!c.interferer) c.interferer = InterfererConfig{};
  fs::create_directories(c.out);
  std::ofstream csv(fs::path(c.out) / "share.csv");
  if (!csv) throw ConfigError("cannot write share.csv");
  const auto r = run_sharing_experiment(c, &csv);
  const auto j = to_json(r, c);
  detail::write_json(fs::path(c.out) / "penalty.json", j);
  std::cout << "penalty_db: " << j["penalty_db"].dump() << '\n';
  return 0;
}

int cmd_encode(const CommonFlags& f, std::optional<double> ebn0, std::size_t symbols) {
  const auto c = build_config(f);
  const auto alphabet = Alphabet::parse(c.alphabet);
  const auto pulse = c.waveform.make(static_cast<long>(c.k), c.symbol_time);
  const std::size_t lt = symbols ? symbols : c.effective_frame_symbols();
  const auto bits = random_bits(lt * alphabet.bits_per_symbol(), derive_seed(c.seed, 0, 0, SeedStream::Bits));
  const auto frame = make_frame(bits, pulse, alphabet);
  auto header = make_frame_header(pulse, alphabet, lt);
  header.seed = c.seed;
  auto samples = frame.samples;
  if (ebn0) {
    const auto cal = calibrate_noise(frame.samples, alphabet.bits_per_symbol(), c.k, *ebn0);
    samples = awgn(frame.samples, cal.noise_variance, derive_seed(c.seed, 0, 0, SeedStream::Noise));
    header.noise_variance = cal.noise_variance;
  }
  fs::create_directories(c.out);
  save_frame(fs::path(c.out) / "frame.bin", samples, header);
  std::ofstream(fs::path(c.out) / "bits.hex") << bits_to_hex(bits) << '\n';
  std::cout << "wrote " << (fs::path(c.out) / "frame.bin").string() << " (" << samples.size() << " samples)\n";
  return 0;
}

int cmd_decode(const CommonFlags& f, const std::string& input, std::optional<double> noise_override) {
  const auto c = build_config(f);
  const auto loaded = load_frame(input);
  const auto pulse = pulse_from_header(loaded.header);
  const auto alphabet = Alphabet::parse(loaded.header.alphabet);
  const double sigma = noise_override.value_or(loaded.header.noise_variance.value_or(0.0));
  ExperimentConfig dc = c;
  dc.k = loaded.header.k;
  const auto choice = resolve_decoder(dc, alphabet.size());
  DecodeResult r;
  if (choice == DecoderChoice::Viterbi)
    r = viterbi_decode(loaded.samples, pulse, alphabet);
  else
    r = smc_decode(loaded.samples, pulse, alphabet, sigma, c.smc, derive_seed(c.seed, 0, 0, SeedStream::Decoder));
  fs::create_directories(c.out);
  std::ofstream(fs::path(c.out) / "decoded.hex") << bits_to_hex(r.bits) << '\n';
  auto diag = to_json(r.diagnostics);
  diag["symbols"] = r.symbols.size();
  detail::write_json(fs::path(c.out) / "diagnostics.json", diag);
  std::cout << diag.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Overlapped multiplexing simulation toolkit"};
  app.require_subcommand(1);

  CommonFlags cap_f, ber_f, spec_f, share_f, enc_f, dec_f;
  auto* cap = app.add_subcommand("capacity", "capacity curves and required Eb/N0 per K");
  add_common(cap, cap_f);
  auto* ber = app.add_subcommand("ber", "BER waterfall through calibrated AWGN");
  add_common(ber, ber_f);
  auto* spec = app.add_subcommand("spectrum", "pulse spectrum and bandwidth report");
  add_common(spec, spec_f);
  auto* share = app.add_subcommand("share", "joint vs naive decoding with a QAM interferer");
  add_common(share, share_f);
  auto* enc = app.add_subcommand("encode", "encode random bits into a sample record");
  add_common(enc, enc_f);
  std::optional<double> enc_ebn0;
  std::size_t enc_symbols = 0;
  enc->add_option("--noise-ebn0", enc_ebn0, "add calibrated AWGN at this Eb/N0 (dB)");
  enc->add_option("--symbols", enc_symbols, "frame length L_t (default 10 K)");
  auto* dec = app.add_subcommand("decode", "decode a sample record");
  add_common(dec, dec_f);
  std::string dec_input;
  std::optional<double> dec_noise;
  dec->add_option("--input", dec_input, "sample record (.bin with .bin.json sidecar)")->required();
  dec->add_option("--noise-variance", dec_noise, "override the sidecar noise variance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*cap) return cmd_capacity(cap_f);
    if (*ber) return cmd_ber(ber_f);
    if (*spec) return cmd_spectrum(spec_f);
    if (*share) return cmd_share(share_f);
    if (*enc) return cmd_encode(enc_f, enc_ebn0, enc_symbols);
    if (*dec) return cmd_decode(dec_f, dec_input, dec_noise);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
