#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "psw/experiment.hpp"

namespace psw {

namespace {

constexpr const char* kClicksHeader = "# clicks v1";
constexpr const char* kTruthHeader = "# truth v1";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
    if (tab == std::string::npos) return out;
    pos = tab + 1;
  }
}

template <typename T>
T parse_integer(const std::string& field, const char* what) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) throw std::runtime_error(std::string("invalid ") + what + " '" + field + "'");
  return value;
}

double parse_real(const std::string& field, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used == field.size()) return v;
  } catch (const std::exception&) {
  }
  throw std::runtime_error(std::string("invalid ") + what + " '" + field + "'");
}

}  // namespace

void write_clicks(std::ostream& out, const std::vector<ClickRecord>& clicks) {
  out << kClicksHeader << '\n';
  for (const auto& c : clicks) out << c.cycle_id << '\t' << c.detector_id << '\t' << c.timestamp_ps << '\n';
}

void write_clicks(const std::filesystem::path& path, const std::vector<ClickRecord>& clicks) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_clicks(out, clicks);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

namespace {

// Line-level click parser shared by the whole-file and streaming readers.
class ClickLineParser {
 public:
  ClickLineParser(std::istream& in, std::string source, std::int64_t resolution_ps)
      : in_(in), source_(std::move(source)), resolution_ps_(resolution_ps) {}

  std::optional<ClickRecord> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto where = source_ + ":" + std::to_string(line_no_) + ": ";
      if (line[0] == '#') {
        if (line_no_ == 1) {
          if (line != kClicksHeader) throw std::runtime_error(where + "unsupported header '" + line + "'");
          header_ = true;
        }
        continue;
      }
      if (!header_) throw std::runtime_error(where + "missing '" + kClicksHeader + "' header");
      const auto fields = split_tabs(line);
      if (fields.size() != 3) throw std::runtime_error(where + "expected 3 tab-separated fields");
      ClickRecord c;
      try {
        c.cycle_id = parse_integer<std::uint64_t>(fields[0], "cycle_id");
        c.detector_id = parse_integer<int>(fields[1], "detector_id");
        c.timestamp_ps = parse_integer<std::int64_t>(fields[2], "timestamp_ps");
      } catch (const std::exception& e) {
        throw std::runtime_error(where + e.what());
      }
      if (c.detector_id < 0 || c.detector_id > 4) throw std::runtime_error(where + "detector_id outside 0..4");
      if (c.timestamp_ps < 0) throw std::runtime_error(where + "negative timestamp");
      if (resolution_ps_ > 0 && c.timestamp_ps % resolution_ps_ != 0)
        throw std::runtime_error(where + "timestamp not a multiple of " + std::to_string(resolution_ps_) + " ps");
      return c;
    }
    if (!header_) throw std::runtime_error(source_ + ": empty click file");
    return std::nullopt;
  }

  std::string where() const { return source_ + ":" + std::to_string(line_no_) + ": "; }

 private:
  std::istream& in_;
  std::string source_;
  std::int64_t resolution_ps_;
  std::size_t line_no_ = 0;
  bool header_ = false;
};

}  // namespace

std::vector<ClickRecord> read_clicks(std::istream& in, const std::string& source, std::int64_t resolution_ps) {
  ClickLineParser parser(in, source, resolution_ps);
  std::vector<ClickRecord> out;
  while (auto c = parser.next()) out.push_back(*c);
  return out;
}

struct ClickStreamReader::Impl {
  std::ifstream file;
  std::optional<ClickLineParser> parser;
  std::optional<ClickRecord> pending;
  std::optional<std::uint64_t> last;
};

ClickStreamReader::ClickStreamReader(const std::filesystem::path& path, std::int64_t resolution_ps)
    : impl_(std::make_unique<Impl>()) {
  impl_->file.open(path);
  if (!impl_->file) throw std::runtime_error("cannot open " + path.string());
  impl_->parser.emplace(impl_->file, path.string(), resolution_ps);
  impl_->pending = impl_->parser->next();
}

ClickStreamReader::~ClickStreamReader() = default;

bool ClickStreamReader::next_cycle(std::vector<ClickRecord>& out) {
  out.clear();
  if (!impl_->pending) return false;
  const auto cycle = impl_->pending->cycle_id;
  if (impl_->last && cycle <= *impl_->last)
    throw std::runtime_error(impl_->parser->where() + "cycles out of order");
  impl_->last = cycle;
  while (impl_->pending && impl_->pending->cycle_id == cycle) {
    out.push_back(*impl_->pending);
    impl_->pending = impl_->parser->next();
  }
  return true;
}

bool ClickStreamReader::next_block(std::vector<ClickRecord>& out, std::size_t min_records) {
  const auto before = out.size();
  std::vector<ClickRecord> cycle;
  while (out.size() - before < min_records && next_cycle(cycle)) out.insert(out.end(), cycle.begin(), cycle.end());
  return out.size() > before;
}

std::optional<std::uint64_t> ClickStreamReader::last_cycle() const { return impl_->last; }


std::vector<ClickRecord> read_clicks(const std::filesystem::path& path, std::int64_t resolution_ps) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_clicks(in, path.string(), resolution_ps);
}

std::filesystem::path truth_path_for(const std::filesystem::path& clicks_path) {
  auto p = clicks_path;
  p.replace_extension(".truth");
  return p;
}

void write_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_truth(out, truth, true);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_truth(std::ostream& out, const GroundTruth& truth, bool header) {
  out.precision(17);
  if (header) out << kTruthHeader << '\n';
  for (const auto& t : truth.transits)
    out << "transit\t" << t.cycle_id << '\t' << t.transit.start << '\t' << t.transit.duration << '\t' << t.transit.g
        << '\t' << to_string(t.transit.initial_atom) << '\n';
  for (const auto& p : truth.pulses)
    out << "pulse\t" << p.cycle_id << '\t' << p.pulse_index << '\t' << p.transit_index << '\t'
        << to_string(p.atom_before) << '\t' << to_string(p.atom_after) << '\t' << p.photons << '\t' << p.reflected
        << '\t' << p.transmitted << '\t' << p.lost << '\t' << (p.outcomes.empty() ? "-" : p.outcomes) << '\n';
}

GroundTruth read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  GroundTruth truth;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    const auto f = split_tabs(line);
    try {
      if (f[0] == "transit" && f.size() == 6) {
        TransitTruth t;
        t.cycle_id = parse_integer<std::uint64_t>(f[1], "cycle_id");
        t.transit.start = parse_real(f[2], "start");
        t.transit.duration = parse_real(f[3], "duration");
        t.transit.g = parse_real(f[4], "g");
        t.transit.initial_atom = parse_atom_level(f[5]);
        truth.transits.push_back(t);
      } else if (f[0] == "pulse" && f.size() == 11) {
        PulseTruth p;
        p.cycle_id = parse_integer<std::uint64_t>(f[1], "cycle_id");
        p.pulse_index = parse_integer<int>(f[2], "pulse_index");
        p.transit_index = parse_integer<int>(f[3], "transit_index");
        p.atom_before = parse_atom_level(f[4]);
        p.atom_after = parse_atom_level(f[5]);
        p.photons = parse_integer<int>(f[6], "photons");
        p.reflected = parse_integer<int>(f[7], "reflected");
        p.transmitted = parse_integer<int>(f[8], "transmitted");
        p.lost = parse_integer<int>(f[9], "lost");
        p.outcomes = f[10] == "-" ? "" : f[10];
        truth.pulses.push_back(p);
      } else {
        throw std::runtime_error("unrecognized record");
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(where + e.what());
    }
  }
  return truth;
}

}  // namespace psw
