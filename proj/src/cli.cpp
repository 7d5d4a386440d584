#include "ztnc/cli.hpp"

#include <chrono>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ztnc/container.hpp"
#include "ztnc/delta.hpp"
#include "ztnc/error.hpp"
#include "ztnc/fp4.hpp"
#include "ztnc/ingest.hpp"
#include "ztnc/io.hpp"
#include "ztnc/kvcache.hpp"
#include "ztnc/synth.hpp"

namespace ztnc::cli {

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

void print_report(std::ostream& out, const CompressionReport& r) {
  out << "format " << r.format << ", " << r.element_count << " elements\n";
  out << std::left << std::setw(15) << "stream" << std::right << std::setw(12) << "original"
      << std::setw(12) << "compressed" << std::setw(9) << "ratio" << std::setw(10) << "entropy"
      << std::setw(10) << "huffman" << "  top symbols\n";
  for (const StreamReport& s : r.streams) {
    std::ostringstream top;
    for (const SymbolCount& c : s.top_symbols) {
      char hex[8];
      std::snprintf(hex, sizeof hex, "%02x", c.symbol);
      top << hex << ':' << c.count << ' ';
    }
    out << std::left << std::setw(15) << to_string(s.kind) << std::right << std::setw(12)
        << s.original_bytes << std::setw(12) << s.compressed_bytes << std::setw(9)
        << fixed(s.ratio) << std::setw(10) << fixed(s.entropy_bits, 3) << std::setw(10)
        << (std::to_string(s.huffman_chunks) + "/" + std::to_string(s.chunks)) << "  "
        << top.str() << '\n';
  }
  out << std::left << std::setw(15) << "total" << std::right << std::setw(12) << r.original_bytes
      << std::setw(12) << r.compressed_bytes << std::setw(9) << fixed(r.total_ratio)
      << "  (" << r.overhead_bytes << " header bytes; "
      << fixed(100.0 * r.total_ratio, 1) << "% of original)\n";
}

void print_archive_report(std::ostream& out, const ArchiveReport& r) {
  out << std::left << std::setw(40) << "tensor" << std::setw(10) << "dtype" << std::right
      << std::setw(14) << "original" << std::setw(14) << "compressed" << std::setw(9) << "ratio"
      << std::setw(10) << "exponent" << std::setw(10) << "mantissa" << '\n';
  for (const TensorReport& t : r.tensors) {
    const StreamReport* e = t.report.stream(StreamKind::kExponent);
    const StreamReport* m = t.report.stream(StreamKind::kSignMantissa);
    out << std::left << std::setw(40) << t.name << std::setw(10) << t.dtype << std::right
        << std::setw(14) << t.report.original_bytes << std::setw(14)
        << t.report.compressed_bytes << std::setw(9) << fixed(t.report.total_ratio)
        << std::setw(10) << (e ? fixed(e->ratio) : "-") << std::setw(10)
        << (m ? fixed(m->ratio) : "-") << '\n';
  }
  out << "tensors: " << r.tensor_original_bytes << " -> " << r.tensor_compressed_bytes
      << " bytes, ratio " << fixed(r.tensor_ratio) << '\n';
  out << "file:    " << r.file_original_bytes << " -> " << r.file_compressed_bytes
      << " bytes, ratio " << fixed(r.file_ratio) << '\n';
}

void emit(std::ostream& out, bool json, const CompressionReport& r) {
  if (json) {
    out << to_json(r).dump(2) << '\n';
  } else {
    print_report(out, r);
  }
}

ContainerOptions options_from(std::uint32_t chunk_size, unsigned threads) {
  if (chunk_size == 0) throw UsageError("--chunk-size must be positive");
  return ContainerOptions{chunk_size, threads};
}

// Payload and scales either from two files or from one file holding the
// payload followed by the scales. Without --elements the count is taken to
// be even.
Fp4Tensor load_fp4(const std::string& in, const std::string& scales_path, std::size_t elements,
                   Fp4Scheme scheme) {
  Fp4Tensor t;
  t.layout = Fp4Layout::of(scheme);
  Bytes payload = read_file(in);
  if (!scales_path.empty()) {
    t.element_count = elements != 0 ? elements : payload.size() * 2;
    t.nibbles = std::move(payload);
    t.scales = read_file(scales_path);
    return t;
  }
  std::size_t n = elements;
  if (n == 0) {
    // Smallest even n with n/2 + ceil(n/B) == size; that sum grows by 1 or 2
    // per step of 2, so the solution is unique when it exists.
    const std::size_t b = t.layout.block_size;
    std::size_t guess = payload.size() * 2 * b / (b + 2);
    guess -= guess % 2;
    for (std::size_t cand = guess > 8 ? guess - 8 : 0; cand <= guess + 8; cand += 2) {
      if (Fp4Tensor::nibble_bytes(cand) + Fp4Tensor::scale_count(cand, t.layout) == payload.size()) {
        n = cand;
        break;
      }
    }
    if (n == 0 && !payload.empty()) {
      throw UsageError("cannot infer the element count of a combined fp4 file; pass --elements");
    }
  }
  const std::size_t nibble_len = Fp4Tensor::nibble_bytes(n);
  if (nibble_len > payload.size()) throw InvalidInputError("fp4 file shorter than --elements implies");
  t.element_count = n;
  t.nibbles.assign(payload.begin(), payload.begin() + static_cast<std::ptrdiff_t>(nibble_len));
  t.scales.assign(payload.begin() + static_cast<std::ptrdiff_t>(nibble_len), payload.end());
  return t;
}

struct CodecArgs {
  std::string format;
  std::uint32_t chunk_size = kDefaultChunkSize;
  unsigned threads = 0;
  bool json = false;
  std::string scales;
  std::size_t elements = 0;
};

void add_common(CLI::App* cmd, CodecArgs& a) {
  cmd->add_option("--chunk-size", a.chunk_size, "Original bytes per chunk")->capture_default_str();
  cmd->add_option("--threads", a.threads, "Worker threads (0 = all cores)")->capture_default_str();
  cmd->add_flag("--json", a.json, "Print the report as JSON");
}

constexpr const char* kFormats = "bf16|fp8-e4m3|fp8-e5m2|mxfp4|nvfp4|raw|safetensors";

int cmd_compress(const CodecArgs& a, const std::string& in, const std::string& out_path,
                 std::ostream& out, std::ostream& err) {
  const ContainerOptions opts = options_from(a.chunk_size, a.threads);
  if (a.format == "safetensors") {
    const SafetensorsFile model = SafetensorsFile::read(in);
    for (const TensorEntry& e : model.skipped()) {
      err << "warning: tensor " << e.name << " has unsupported dtype " << e.dtype
          << "; stored verbatim\n";
    }
    const ArchiveResult r = write_archive(model, opts);
    write_file(out_path, r.archive);
    if (a.json) {
      out << to_json(r.report).dump(2) << '\n';
    } else {
      print_archive_report(out, r.report);
    }
    return kSuccess;
  }
  CompressResult r;
  if (const auto f = parse_format(a.format); f && f->id != FormatId::kFP4E2M1) {
    r = compress_tensor(read_file(in), *f, opts);
  } else if (const auto scheme = parse_fp4_scheme(a.format)) {
    r = compress_fp4(load_fp4(in, a.scales, a.elements, *scheme), opts);
  } else if (a.format == "raw") {
    r = compress_bytes(read_file(in), opts);
  } else {
    throw UsageError("unknown format '" + a.format + "' (expected " + kFormats + ")");
  }
  write_file(out_path, r.container);
  emit(out, a.json, r.report);
  return kSuccess;
}

int cmd_decompress(const std::string& in, const std::string& out_path, const std::string& scales_out,
                   unsigned threads, std::ostream& out) {
  const Bytes data = read_file(in);
  const ContainerOptions opts{kDefaultChunkSize, threads};
  if (is_archive(data)) {
    write_file(out_path, read_archive(data, opts));
  } else if (!scales_out.empty()) {
    const Fp4Tensor t = decompress_fp4(data, opts);
    write_file(out_path, t.nibbles);
    write_file(scales_out, t.scales);
  } else {
    write_file(out_path, decompress_tensor(data, opts));
  }
  out << "wrote " << out_path << '\n';
  return kSuccess;
}

int cmd_profile(const CodecArgs& a, const std::string& in, std::ostream& out) {
  const ContainerOptions opts = options_from(a.chunk_size, a.threads);
  if (a.format == "safetensors") {
    const SafetensorsFile model = SafetensorsFile::read(in);
    ArchiveReport agg;
    for (const TensorEntry& e : model.entries()) {
      const ByteView data = model.data(e);
      CompressionReport r;
      switch (*payload_format_for_dtype(e.dtype)) {
        case PayloadFormat::kBF16: r = profile_tensor(data, kBF16, opts); break;
        case PayloadFormat::kFP8E4M3: r = profile_tensor(data, kFP8E4M3, opts); break;
        case PayloadFormat::kFP8E5M2: r = profile_tensor(data, kFP8E5M2, opts); break;
        default: r = profile_bytes(data, opts); break;
      }
      agg.tensor_original_bytes += r.original_bytes;
      agg.tensor_compressed_bytes += r.compressed_bytes;
      agg.tensors.push_back({e.name, e.dtype, std::move(r)});
    }
    for (const TensorEntry& e : model.skipped()) agg.skipped.push_back(e.name);
    agg.tensor_ratio = safe_ratio(agg.tensor_compressed_bytes, agg.tensor_original_bytes);
    agg.file_original_bytes = model.bytes().size();
    if (a.json) {
      nlohmann::json j = to_json(agg);
      j.erase("file_compressed_bytes");
      j.erase("file_ratio");
      out << j.dump(2) << '\n';
    } else {
      print_archive_report(out, agg);
    }
    return kSuccess;
  }
  CompressionReport r;
  if (const auto f = parse_format(a.format); f && f->id != FormatId::kFP4E2M1) {
    r = profile_tensor(read_file(in), *f, opts);
  } else if (const auto scheme = parse_fp4_scheme(a.format)) {
    r = profile_fp4(load_fp4(in, a.scales, a.elements, *scheme), opts);
  } else if (a.format == "raw") {
    r = profile_bytes(read_file(in), opts);
  } else {
    throw UsageError("unknown format '" + a.format + "' (expected " + kFormats + ")");
  }
  if (a.json) {
    nlohmann::json j = to_json(r);
    for (auto& s : j["streams"]) {
      s["decision"] = s["huffman_chunks"] == 0 ? "raw"
                      : s["huffman_chunks"] == s["chunks"] ? "huffman"
                                                           : "mixed";
    }
    out << j.dump(2) << '\n';
  } else {
    print_report(out, r);
    for (const StreamReport& s : r.streams) {
      out << to_string(s.kind) << ": "
          << (s.huffman_chunks == 0 ? "raw" : s.huffman_chunks == s.chunks ? "huffman" : "mixed")
          << '\n';
    }
  }
  return kSuccess;
}

int cmd_regroup(const std::string& in, std::size_t elements, int bits, bool json, std::ostream& out) {
  const Bytes payload = read_file(in);
  const std::size_t n = elements != 0 ? elements : payload.size() * 2;
  if (n < 4) throw UsageError("need at least 4 fp4 elements");
  const RegroupResult r = regroup_bits_experiment(payload, n, bits);
  const StreamReport& s = r.report.streams.front();
  if (json) {
    nlohmann::json j = to_json(r.report);
    j["bits_per_element"] = bits;
    out << j.dump(2) << '\n';
  } else {
    out << "regrouped " << n << " fp4 elements (" << bits << " bits each) into "
        << r.regrouped.size() << " bytes\n";
    out << "entropy " << fixed(s.entropy_bits, 4) << " bits/byte, huffman ratio "
        << fixed(s.ratio) << '\n';
  }
  return kSuccess;
}

struct KvArgs {
  std::string format = "bf16";
  std::size_t steps = 200;
  std::string distribution = "gaussian";
  std::uint64_t seed = 0;
  std::size_t elements = 8192;
  std::size_t calibration = 8;
  std::size_t window = 32;
  double threshold = 0.05;
  bool json = false;
  bool quiet = false;
};

int cmd_kv_bench(const KvArgs& a, std::ostream& out) {
  const auto format = parse_format(a.format);
  if (!format || (format->id != FormatId::kBF16 && format->id != FormatId::kFP8E4M3)) {
    throw UsageError("kv-bench supports bf16 and fp8-e4m3");
  }
  const auto workload = synth::parse_kv_workload(a.distribution);
  if (!workload) throw UsageError("unknown distribution '" + a.distribution + "'");
  if (a.elements == 0 || a.calibration == 0) throw UsageError("--elements and --calibration must be positive");

  synth::Rng rng(a.seed);
  std::vector<Bytes> calibration;
  for (std::size_t i = 0; i < a.calibration; ++i) {
    calibration.push_back(synth::kv_calibration_tensor(*format, a.elements, rng));
  }
  KvConfig config;
  config.window = a.window;
  config.rebuild_threshold = a.threshold;
  KvSession session = KvSession::open(*format, {calibration.begin(), calibration.end()}, config);
  const double initial_baseline = session.baseline_ratio();

  nlohmann::json steps = nlohmann::json::array();
  std::vector<std::size_t> rebuilds;
  std::vector<Bytes> originals;
  double seconds = 0.0;
  double ratio_sum = 0.0;
  std::uint64_t original_bytes = 0;
  if (!a.json && !a.quiet) out << "step   ratio  exponent  mantissa  gen  event\n";
  for (std::size_t i = 0; i < a.steps; ++i) {
    Bytes tensor = synth::kv_step_tensor(*format, *workload, i, a.elements, rng);
    const auto t0 = std::chrono::steady_clock::now();
    const StepResult r = session.compress_step(tensor);
    const bool rebuilt = session.maybe_rebuild() == RebuildDecision::kRebuilt;
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (rebuilt) rebuilds.push_back(i);
    ratio_sum += r.ratio;
    original_bytes += tensor.size();
    originals.push_back(std::move(tensor));
    if (a.json) {
      steps.push_back({{"step", i},
                       {"ratio", r.ratio},
                       {"exponent_ratio", r.stream_ratios[0]},
                       {"sign_mantissa_ratio", r.stream_ratios[1]},
                       {"generation", r.generation},
                       {"rebuilt", rebuilt}});
    } else if (!a.quiet) {
      out << std::setw(4) << i << "  " << fixed(r.ratio) << "  " << fixed(r.stream_ratios[0])
          << "    " << fixed(r.stream_ratios[1]) << "  " << std::setw(3) << r.generation
          << (rebuilt ? "  rebuild" : "") << '\n';
    }
  }
  const std::vector<Bytes> decoded = decode_session_stream(session.stream());
  const bool verified = decoded == originals;
  const double mb_s = seconds > 0 ? static_cast<double>(original_bytes) / seconds / 1e6 : 0.0;
  const double mean = a.steps == 0 ? 0.0 : ratio_sum / static_cast<double>(a.steps);
  if (a.json) {
    out << nlohmann::json{{"format", a.format},
                          {"distribution", a.distribution},
                          {"seed", a.seed},
                          {"elements_per_step", a.elements},
                          {"initial_baseline", initial_baseline},
                          {"final_baseline", session.baseline_ratio()},
                          {"mean_ratio", mean},
                          {"rebuilds", rebuilds},
                          {"codebook_builds", session.codebook_builds()},
                          {"stream_bytes", session.stream().size()},
                          {"throughput_mb_s", mb_s},
                          {"verified", verified},
                          {"steps", steps}}
               .dump(2)
        << '\n';
  } else {
    out << "steps " << a.steps << ", mean ratio " << fixed(mean) << ", baseline "
        << fixed(initial_baseline) << " -> " << fixed(session.baseline_ratio()) << '\n';
    out << "rebuilds: " << rebuilds.size();
    for (const std::size_t s : rebuilds) out << " @" << s;
    out << '\n';
    out << "throughput " << fixed(mb_s, 1) << " MB/s, lossless replay "
        << (verified ? "ok" : "FAILED") << '\n';
  }
  return verified ? kSuccess : kInternal;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lossless compression for low-precision tensors", "ztnc"};
  app.require_subcommand(1);

  CodecArgs codec;
  std::string in, out_path, base, next, delta_path, scales_out;
  unsigned threads = 0;

  CLI::App* compress = app.add_subcommand("compress", "Compress a tensor or safetensors model");
  compress->add_option("--format", codec.format, kFormats)->required();
  compress->add_option("--scales", codec.scales, "FP4 scale file (otherwise appended to IN)");
  compress->add_option("--elements", codec.elements, "FP4 element count");
  add_common(compress, codec);
  compress->add_option("IN", in)->required();
  compress->add_option("OUT", out_path)->required();

  CLI::App* decompress = app.add_subcommand("decompress", "Restore the original bytes");
  decompress->add_option("--scales-out", scales_out, "Write FP4 scales to a separate file");
  decompress->add_option("--threads", threads);
  decompress->add_option("IN", in)->required();
  decompress->add_option("OUT", out_path)->required();

  CLI::App* delta = app.add_subcommand("delta", "Compress the XOR delta of two BF16 checkpoints");
  delta->add_option("--base", base)->required();
  delta->add_option("--next", next)->required();
  add_common(delta, codec);
  delta->add_option("OUT", out_path)->required();

  CLI::App* apply = app.add_subcommand("apply", "Rebuild a checkpoint from its base and a delta");
  apply->add_option("--base", base)->required();
  apply->add_option("--delta", delta_path)->required();
  apply->add_option("--threads", threads);
  apply->add_option("OUT", out_path)->required();

  CLI::App* profile = app.add_subcommand("profile", "Report per-stream statistics, write nothing");
  profile->add_option("--format", codec.format, kFormats)->required();
  profile->add_option("--scales", codec.scales);
  profile->add_option("--elements", codec.elements);
  add_common(profile, codec);
  profile->add_option("IN", in)->required();

  std::size_t regroup_elements = 0;
  int regroup_bits = 2;
  bool regroup_json = false;
  CLI::App* regroup = app.add_subcommand("fp4-regroup", "Bit-regrouping experiment on FP4 payloads");
  regroup->add_option("--elements", regroup_elements, "Element count (default: 2 per byte)");
  regroup->add_option("--bits", regroup_bits, "Top bits taken per element")
      ->check(CLI::IsMember({1, 2, 4}))
      ->capture_default_str();
  regroup->add_flag("--json", regroup_json);
  regroup->add_option("IN", in)->required();

  KvArgs kv;
  CLI::App* bench = app.add_subcommand("kv-bench", "Streaming K/V compression on synthetic steps");
  bench->add_option("--format", kv.format, "bf16|fp8-e4m3")->capture_default_str();
  bench->add_option("--steps", kv.steps)->capture_default_str();
  bench->add_option("--distribution", kv.distribution, "gaussian|shift:K|uniform")
      ->capture_default_str();
  bench->add_option("--seed", kv.seed)->capture_default_str();
  bench->add_option("--elements", kv.elements, "Elements per step tensor")->capture_default_str();
  bench->add_option("--calibration", kv.calibration, "Calibration tensors")->capture_default_str();
  bench->add_option("--window", kv.window)->capture_default_str();
  bench->add_option("--threshold", kv.threshold)->capture_default_str();
  bench->add_flag("--json", kv.json);
  bench->add_flag("--quiet", kv.quiet, "Summary only");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    if (*compress) return cmd_compress(codec, in, out_path, out, err);
    if (*decompress) return cmd_decompress(in, out_path, scales_out, threads, out);
    if (*delta) {
      const ContainerOptions opts = options_from(codec.chunk_size, codec.threads);
      const CompressResult r = compress_delta(read_file(base), read_file(next), opts);
      write_file(out_path, r.container);
      emit(out, codec.json, r.report);
      return kSuccess;
    }
    if (*apply) {
      const Bytes rebuilt =
          apply_delta(read_file(base), read_file(delta_path), ContainerOptions{kDefaultChunkSize, threads});
      write_file(out_path, rebuilt);
      out << "wrote " << out_path << '\n';
      return kSuccess;
    }
    if (*profile) return cmd_profile(codec, in, out);
    if (*regroup) return cmd_regroup(in, regroup_elements, regroup_bits, regroup_json, out);
    if (*bench) return cmd_kv_bench(kv, out);
  } catch (const CorruptError& e) {
    err << "error: corrupt input: " << e.what() << '\n';
    return kCorrupt;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidInputError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace ztnc::cli
