#include "qrng/config.hpp"

#include <yaml-cpp/yaml.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace qrng {

ConfigError::ConfigError(const std::string& message, int line)
    : DomainError(line > 0 ? "config line " + std::to_string(line) + ": " + message : "config: " + message),
      line_(line) {}

bool operator==(const SimulationRun& a, const SimulationRun& b) {
    return a.model == b.model && a.chain == b.chain && a.duration == b.duration &&
           a.oversample_factor == b.oversample_factor && a.seed == b.seed &&
           a.optical_transmission == b.optical_transmission && a.adc_sigma_v == b.adc_sigma_v;
}

DriftScenario StabilityConfig::scenario(bool with_recalibration) const {
    DriftScenario s;
    s.phase_drift_rate = phase_drift_rate;
    if (power_drift_amplitude != 0.0) {
        const double amp = power_drift_amplitude;
        const double period = power_drift_period;
        s.power_drift = [amp, period](double t) { return 1.0 + amp * std::sin(2.0 * std::numbers::pi * t / period); };
    }
    if (with_recalibration) s.recalibration_period = recalibration_period;
    return s;
}

namespace {

int line_of(const YAML::Node& n) {
    const auto m = n.Mark();
    return m.is_null() ? 0 : m.line + 1;
}

// Reads a mapping and remembers which keys were consumed so leftovers can be reported.
class Section {
  public:
    Section(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name)) {
        if (node_ && !node_.IsMap()) throw ConfigError("section '" + name_ + "' must be a mapping", line_of(node_));
    }

    bool present() const { return static_cast<bool>(node_); }
    bool has(const std::string& key) const { return node_ && node_[key]; }

    YAML::Node get(const std::string& key) {
        seen_.insert(key);
        return node_ ? node_[key] : YAML::Node(YAML::NodeType::Undefined);
    }

    template<typename T>
    T required(const std::string& key) {
        auto n = get(key);
        if (!n) throw ConfigError("missing required key '" + qualified(key) + "'", line_of(node_));
        return convert<T>(n, key);
    }

    template<typename T>
    void optional(const std::string& key, T& target) {
        if (auto n = get(key)) target = convert<T>(n, key);
    }

    template<typename T>
    void optional(const std::string& key, std::optional<T>& target) {
        if (auto n = get(key)) target = convert<T>(n, key);
    }

    void finish() const {
        if (!node_) return;
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.contains(key)) throw ConfigError("unknown key '" + qualified(key) + "'", line_of(kv.first));
        }
    }

    template<typename T>
    T convert(const YAML::Node& n, const std::string& key) const {
        if (!n.IsScalar()) throw ConfigError("'" + qualified(key) + "' must be a scalar", line_of(n));
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError("invalid value '" + n.Scalar() + "' for '" + qualified(key) + "'", line_of(n));
        }
    }

    int line() const { return line_of(node_); }
    std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  private:
    YAML::Node node_;
    std::string name_;
    std::set<std::string> seen_;
};

// Rethrows a validation failure against the line of the section it came from.
template<typename Fn>
void check(int line, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const DomainError& e) {
        throw ConfigError(e.what(), line);
    }
}

std::string num(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

void parse_chain(Section& s, SignalChainConfig& c) {
    s.optional("delay_td", c.delay_td);
    s.optional("quadrature_offset", c.quadrature_offset);
    s.optional("conversion_gain_a", c.conversion_gain_a);
    s.optional("electronic_noise_f", c.electronic_noise_f);
    s.optional("tia_cutoff_hz", c.tia_cutoff_hz);
    s.optional("adc_bits", c.adc_bits);
    s.optional("adc_range_sigmas", c.adc_range_sigmas);
    s.optional("sample_rate_hz", c.sample_rate_hz);
    if (auto tones = s.get("rf_tones")) {
        if (!tones.IsSequence()) throw ConfigError("'chain.rf_tones' must be a list", line_of(tones));
        for (const auto& t : tones) {
            Section ts(t, "chain.rf_tones[]");
            RfTone tone;
            tone.frequency_hz = ts.required<double>("frequency_hz");
            tone.amplitude_v = ts.required<double>("amplitude_v");
            ts.finish();
            c.rf_tones.push_back(tone);
        }
    }
    s.finish();
}

void parse_laser(Section& s, const SignalChainConfig& chain, LaserNoiseModel& m) {
    const bool rates = s.has("quantum_diffusion_q") || s.has("classical_diffusion_c");
    const bool coeffs = s.has("ac") || s.has("aq");
    if (rates && coeffs) {
        throw ConfigError("laser: give either diffusion rates or ac/aq coefficients, not both", s.line());
    }
    if (coeffs) {
        const double ac = s.required<double>("ac");
        const double aq = s.required<double>("aq");
        check(s.line(), [&] { m = laser_from_coefficients(ac, aq, chain); });
    } else {
        m.quantum_diffusion_q = s.required<double>("quantum_diffusion_q");
        m.classical_diffusion_c = s.required<double>("classical_diffusion_c");
    }
    m.power_p = s.required<double>("power_p");
    s.finish();
}

} // namespace

void Config::validate() const {
    run.validate();
    if (calibration.powers.size() > 0) {
        for (double p : calibration.powers) {
            if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("calibration: powers must be positive");
        }
    }
    if (calibration.samples_per_point < 2) throw DomainError("calibration: samples_per_point must be >= 2");
    if (calibration.fringe_points < 8) throw DomainError("calibration: fringe_points must be >= 8");
    if (calibration.fringe_samples < 2) throw DomainError("calibration: fringe_samples must be >= 2");
    if (!(calibration.attenuation_source_power > 0.0)) {
        throw DomainError("calibration: attenuation_source_power must be positive");
    }
    if (!(entropy.security_eps > 0.0 && entropy.security_eps < 1.0)) throw DomainError("entropy: security_eps must be in (0, 1)");
    if (entropy.min_entropy_override &&
        !(*entropy.min_entropy_override > 0.0 && *entropy.min_entropy_override <= run.chain.adc_bits)) {
        throw DomainError("entropy: min_entropy_override must be in (0, adc_bits]");
    }
    if (extractor.n_in < 2) throw DomainError("extractor: n_in must be >= 2");
    if (extractor.n_out && (*extractor.n_out < 1 || *extractor.n_out > extractor.n_in)) {
        throw DomainError("extractor: n_out must be in [1, n_in]");
    }
    if (stats.n_sequences < 1 || stats.seq_len_bits < 100) throw DomainError("stats: need >= 1 sequence of >= 100 bits");
    if (stats.max_lag < 1) throw DomainError("stats: max_lag must be >= 1");
    if (stats.psd_segment < 8 || (stats.psd_segment & (stats.psd_segment - 1)) != 0) {
        throw DomainError("stats: psd_segment must be a power of two >= 8");
    }
    if (stability) {
        const auto& st = *stability;
        if (!(st.report_interval > 0.0) || !(st.total_time >= 10.0 * st.report_interval)) {
            throw DomainError("stability: total_time must cover at least 10 positive report intervals");
        }
        if (!(st.power_drift_period > 0.0)) throw DomainError("stability: power_drift_period must be positive");
        if (!(std::abs(st.power_drift_amplitude) < 1.0)) throw DomainError("stability: power_drift_amplitude must be in (-1, 1)");
        if (st.fringe_points < 8) throw DomainError("stability: fringe_points must be >= 8");
        st.scenario(true).validate();
    }
}

Config parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(e.msg, e.mark.line + 1);
    }
    if (!root.IsMap()) throw ConfigError("top level must be a mapping", line_of(root));

    Config cfg;
    Section top(root, "");

    Section chain(top.get("chain"), "chain");
    parse_chain(chain, cfg.run.chain);
    check(chain.line(), [&] { cfg.run.chain.validate(); });

    Section laser(top.get("laser"), "laser");
    if (!laser.present()) throw ConfigError("missing section 'laser'", 1);
    parse_laser(laser, cfg.run.chain, cfg.run.model);
    check(laser.line(), [&] { cfg.run.model.validate(); });

    Section run(top.get("run"), "run");
    if (!run.present()) throw ConfigError("missing section 'run'", 1);
    cfg.run.duration = run.required<double>("duration");
    cfg.run.oversample_factor = run.required<int>("oversample_factor");
    cfg.run.seed = run.required<std::uint64_t>("seed");
    run.optional("optical_transmission", cfg.run.optical_transmission);
    run.optional("adc_sigma_v", cfg.run.adc_sigma_v);
    run.finish();
    check(run.line(), [&] { cfg.run.validate(); });

    Section cal(top.get("calibration"), "calibration");
    if (auto p = cal.get("powers")) {
        if (!p.IsSequence()) throw ConfigError("'calibration.powers' must be a list", line_of(p));
        for (const auto& v : p) cfg.calibration.powers.push_back(cal.convert<double>(v, "powers"));
    }
    cal.optional("samples_per_point", cfg.calibration.samples_per_point);
    cal.optional("fringe_points", cfg.calibration.fringe_points);
    cal.optional("fringe_samples", cfg.calibration.fringe_samples);
    cal.optional("attenuation_source_power", cfg.calibration.attenuation_source_power);
    cal.optional("weighted_fit", cfg.calibration.weighted_fit);
    cal.finish();

    Section ent(top.get("entropy"), "entropy");
    ent.optional("security_eps", cfg.entropy.security_eps);
    ent.optional("min_entropy_override", cfg.entropy.min_entropy_override);
    ent.finish();

    Section ext(top.get("extractor"), "extractor");
    if (!ext.present()) throw ConfigError("missing section 'extractor'", 1);
    ext.optional("n_in", cfg.extractor.n_in);
    ext.optional("n_out", cfg.extractor.n_out);
    cfg.extractor.seed = ext.required<std::uint64_t>("seed");
    ext.finish();

    Section stats(top.get("stats"), "stats");
    stats.optional("n_sequences", cfg.stats.n_sequences);
    stats.optional("seq_len_bits", cfg.stats.seq_len_bits);
    stats.optional("max_lag", cfg.stats.max_lag);
    stats.optional("psd_segment", cfg.stats.psd_segment);
    stats.finish();

    Section stab(top.get("stability"), "stability");
    if (stab.present()) {
        StabilityConfig st;
        st.phase_drift_rate = stab.required<double>("phase_drift_rate");
        stab.optional("power_drift_amplitude", st.power_drift_amplitude);
        stab.optional("power_drift_period", st.power_drift_period);
        st.recalibration_period.reset();
        stab.optional("recalibration_period", st.recalibration_period);
        stab.optional("total_time", st.total_time);
        stab.optional("report_interval", st.report_interval);
        stab.optional("fringe_points", st.fringe_points);
        stab.finish();
        cfg.stability = st;
    }
    top.finish();

    const int sections_line = 1;
    check(sections_line, [&] { cfg.validate(); });
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string(), 0);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string to_yaml(const Config& c) {
    std::ostringstream o;
    const auto& m = c.run.model;
    const auto& ch = c.run.chain;
    o << "laser:\n"
      << "  quantum_diffusion_q: " << num(m.quantum_diffusion_q) << '\n'
      << "  classical_diffusion_c: " << num(m.classical_diffusion_c) << '\n'
      << "  power_p: " << num(m.power_p) << '\n';
    o << "chain:\n"
      << "  delay_td: " << num(ch.delay_td) << '\n'
      << "  quadrature_offset: " << num(ch.quadrature_offset) << '\n'
      << "  conversion_gain_a: " << num(ch.conversion_gain_a) << '\n'
      << "  electronic_noise_f: " << num(ch.electronic_noise_f) << '\n'
      << "  tia_cutoff_hz: " << num(ch.tia_cutoff_hz) << '\n'
      << "  adc_bits: " << ch.adc_bits << '\n'
      << "  adc_range_sigmas: " << num(ch.adc_range_sigmas) << '\n'
      << "  sample_rate_hz: " << num(ch.sample_rate_hz) << '\n';
    if (!ch.rf_tones.empty()) {
        o << "  rf_tones:\n";
        for (const auto& t : ch.rf_tones) {
            o << "    - {frequency_hz: " << num(t.frequency_hz) << ", amplitude_v: " << num(t.amplitude_v) << "}\n";
        }
    }
    o << "run:\n"
      << "  duration: " << num(c.run.duration) << '\n'
      << "  oversample_factor: " << c.run.oversample_factor << '\n'
      << "  seed: " << c.run.seed << '\n'
      << "  optical_transmission: " << num(c.run.optical_transmission) << '\n';
    if (c.run.adc_sigma_v) o << "  adc_sigma_v: " << num(*c.run.adc_sigma_v) << '\n';

    const auto& cal = c.calibration;
    o << "calibration:\n  powers: [";
    for (std::size_t i = 0; i < cal.powers.size(); ++i) o << (i ? ", " : "") << num(cal.powers[i]);
    o << "]\n"
      << "  samples_per_point: " << cal.samples_per_point << '\n'
      << "  fringe_points: " << cal.fringe_points << '\n'
      << "  fringe_samples: " << cal.fringe_samples << '\n'
      << "  attenuation_source_power: " << num(cal.attenuation_source_power) << '\n'
      << "  weighted_fit: " << (cal.weighted_fit ? "true" : "false") << '\n';

    o << "entropy:\n  security_eps: " << num(c.entropy.security_eps) << '\n';
    if (c.entropy.min_entropy_override) o << "  min_entropy_override: " << num(*c.entropy.min_entropy_override) << '\n';

    o << "extractor:\n  n_in: " << c.extractor.n_in << '\n';
    if (c.extractor.n_out) o << "  n_out: " << *c.extractor.n_out << '\n';
    o << "  seed: " << c.extractor.seed << '\n';

    o << "stats:\n"
      << "  n_sequences: " << c.stats.n_sequences << '\n'
      << "  seq_len_bits: " << c.stats.seq_len_bits << '\n'
      << "  max_lag: " << c.stats.max_lag << '\n'
      << "  psd_segment: " << c.stats.psd_segment << '\n';

    if (c.stability) {
        const auto& st = *c.stability;
        o << "stability:\n"
          << "  phase_drift_rate: " << num(st.phase_drift_rate) << '\n'
          << "  power_drift_amplitude: " << num(st.power_drift_amplitude) << '\n'
          << "  power_drift_period: " << num(st.power_drift_period) << '\n';
        if (st.recalibration_period) o << "  recalibration_period: " << num(*st.recalibration_period) << '\n';
        o << "  total_time: " << num(st.total_time) << '\n'
          << "  report_interval: " << num(st.report_interval) << '\n'
          << "  fringe_points: " << st.fringe_points << '\n';
    }
    return o.str();
}

} // namespace qrng
