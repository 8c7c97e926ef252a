#include "cpsguard/config.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cpsguard/errors.hpp"

namespace cpsguard {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

struct Context {
    std::size_t line = 0;
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("config line " + std::to_string(line) + ": " + msg);
    }
};

double to_double(const std::string& s, const Context& ctx) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) ctx.fail("not a number: '" + s + "'");
    return v;
}

std::uint64_t to_u64(const std::string& s, const Context& ctx) {
    std::uint64_t v = 0;
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) ctx.fail("not a nonnegative integer: '" + s + "'");
    return v;
}

bool to_bool(const std::string& s, const Context& ctx) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    ctx.fail("not a boolean: '" + s + "'");
}

std::vector<double> to_vector(const std::string& s, const Context& ctx) {
    std::vector<double> out;
    for (const auto& tok : split_ws(s)) out.push_back(to_double(tok, ctx));
    return out;
}

template <std::size_t N>
void to_array(const std::string& s, double (&arr)[N], const Context& ctx) {
    const auto v = to_vector(s, ctx);
    if (v.size() != N) ctx.fail("expected " + std::to_string(N) + " numbers");
    for (std::size_t i = 0; i < N; ++i) arr[i] = v[i];
}

std::string join(std::span<const double> v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += format_double(v[i]);
    }
    return out;
}

const char* model_name(ModelSource m) { return m == ModelSource::QuadrupleTank ? "quadruple_tank" : "matrices"; }

const char* attack_name(AttackChoice a) {
    switch (a) {
    case AttackChoice::None: return "none";
    case AttackChoice::Covert: return "covert";
    case AttackChoice::Budget: return "budget";
    }
    return "budget";
}

const char* p2_name(P2Method m) { return m == P2Method::MaxDet ? "maxdet" : "scaling"; }

void apply(RunConfig& c, const std::string& key, const std::string& value, bool& schedules_touched,
           const Context& ctx) {
    auto sz = [&] { return static_cast<std::size_t>(to_u64(value, ctx)); };
    auto dbl = [&] { return to_double(value, ctx); };
    if (key.rfind("schedule.", 0) == 0) {
        if (!schedules_touched) c.schedules.clear();
        schedules_touched = true;
        const std::string name = key.substr(9);
        if (name.empty()) ctx.fail("schedule needs a name");
        try {
            c.schedules.push_back(ResponseSchedule::parse(name, value));
        } catch (const Error& e) {
            ctx.fail(e.what());
        }
        return;
    }
    if (key == "model") {
        if (value == "quadruple_tank") c.model = ModelSource::QuadrupleTank;
        else if (value == "matrices") c.model = ModelSource::Matrices;
        else ctx.fail("model must be quadruple_tank or matrices");
    } else if (key == "model.seed") c.model_seed = to_u64(value, ctx);
    else if (key == "model.sample_period") c.sample_period = dbl();
    else if (key == "tank.area") to_array(value, c.tank.area, ctx);
    else if (key == "tank.outlet") to_array(value, c.tank.outlet, ctx);
    else if (key == "tank.level0") to_array(value, c.tank.level0, ctx);
    else if (key == "tank.voltage0") to_array(value, c.tank.voltage0, ctx);
    else if (key == "tank.pump_gain") to_array(value, c.tank.pump_gain, ctx);
    else if (key == "tank.valve_split") to_array(value, c.tank.valve_split, ctx);
    else if (key == "tank.sensor_gain") c.tank.sensor_gain = dbl();
    else if (key == "tank.gravity") c.tank.gravity = dbl();
    else if (key == "tank.sample_period") c.tank.sample_period = dbl();
    else if (key == "detector.window") c.window = sz();
    else if (key == "detector.false_alarm") c.false_alarm = dbl();
    else if (key == "stealth.p_d") c.p_d = dbl();
    else if (key == "safety.p") c.p = dbl();
    else if (key == "safety.bound") c.safety_bound = dbl();
    else if (key == "safety.bounds") c.safety_bounds = to_vector(value, ctx);
    else if (key == "lmi.p1_scale") {
        if (value == "auto") {
            c.p1_scale_auto = true;
        } else {
            c.p1_scale_auto = false;
            c.p1_scale = dbl();
        }
    } else if (key == "lmi.p1_scale_min") c.p1_scale_min = dbl();
    else if (key == "lmi.p1_scale_max") c.p1_scale_max = dbl();
    else if (key == "lmi.p1_scale_points") c.p1_scale_points = sz();
    else if (key == "lmi.alpha1_min") c.lmi.alpha1_min = dbl();
    else if (key == "lmi.alpha1_max") c.lmi.alpha1_max = dbl();
    else if (key == "lmi.alpha1_points") c.lmi.alpha1_points = sz();
    else if (key == "lmi.alpha2_min") c.lmi.alpha2_min = dbl();
    else if (key == "lmi.alpha2_max") c.lmi.alpha2_max = dbl();
    else if (key == "lmi.alpha2_points") c.lmi.alpha2_points = sz();
    else if (key == "lmi.alpha2_margin") c.lmi.alpha2_margin = dbl();
    else if (key == "lmi.alpha3_ratios") c.lmi.alpha3_ratios = to_vector(value, ctx);
    else if (key == "lmi.gamma_a_cap") c.lmi.gamma_a_cap = dbl();
    else if (key == "lmi.bisection_tol") c.lmi.bisection_tol = dbl();
    else if (key == "lmi.p2_method") {
        if (value == "maxdet") c.lmi.p2_method = P2Method::MaxDet;
        else if (value == "scaling") c.lmi.p2_method = P2Method::Scaling;
        else ctx.fail("lmi.p2_method must be maxdet or scaling");
    } else if (key == "lmi.barrier_mu_final") c.lmi.barrier_mu_final = dbl();
    else if (key == "lmi.omega1") c.lmi.omega1 = dbl();
    else if (key == "lmi.omega2") c.lmi.omega2 = dbl();
    else if (key == "lmi.omega3") c.lmi.omega3 = dbl();
    else if (key == "schedules") {
        if (value != "none") ctx.fail("schedules only accepts 'none'");
        c.schedules.clear();
        schedules_touched = true;
    } else if (key == "sim.horizon") c.horizon = sz();
    else if (key == "sim.trials") c.trials = sz();
    else if (key == "sim.seed") c.seed = to_u64(value, ctx);
    else if (key == "sim.attack") {
        if (value == "none") c.attack = AttackChoice::None;
        else if (value == "covert") c.attack = AttackChoice::Covert;
        else if (value == "budget") c.attack = AttackChoice::Budget;
        else ctx.fail("sim.attack must be none, covert or budget");
    } else if (key == "sim.covert_input") c.covert_input = to_vector(value, ctx);
    else if (key == "sim.x0") c.x0 = to_vector(value, ctx);
    else if (key == "sim.stationary_start") c.stationary_start = to_bool(value, ctx);
    else if (key == "sim.threads") c.threads = static_cast<unsigned>(sz());
    else if (key == "sim.trajectories") c.trajectories = to_bool(value, ctx);
    else if (key == "sweep.k") c.sweep_k = sz();
    else if (key == "sweep.ta") c.sweep_ta = sz();
    else if (key == "sweep.k_max") c.sweep_k_max = sz();
    else if (key == "sweep.p") c.sweep_p = to_vector(value, ctx);
    else if (key == "output.dir") c.out_dir = value;
    else ctx.fail("unknown key '" + key + "'");
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

bool open_unit(double v) { return v > 0.0 && v < 1.0; }

} // namespace

void RunConfig::validate() const {
    require(window >= 1, "detector.window must be >= 1");
    require(open_unit(false_alarm), "detector.false_alarm must be in (0,1)");
    require(open_unit(p_d), "stealth.p_d must be in (0,1)");
    require(open_unit(p), "safety.p must be in (0,1)");
    require(horizon >= 1, "sim.horizon must be >= 1");
    require(trials >= 1, "sim.trials must be >= 1");
    require(!p1_scale_auto ? p1_scale > 0.0 : (p1_scale_min > 0.0 && p1_scale_max >= p1_scale_min &&
                                                 p1_scale_points >= 1),
            "lmi.p1_scale settings must be positive");
    require(lmi.alpha1_points >= 1 && lmi.alpha2_points >= 1, "lmi grids need at least one point");
    require(!lmi.alpha3_ratios.empty(), "lmi.alpha3_ratios must not be empty");
    for (double p : sweep_p) require(open_unit(p), "sweep.p entries must be in (0,1)");
    if (model == ModelSource::Matrices) {
        for (const char* name : {"A", "B", "C", "Q", "R", "U"}) {
            require(matrices.count(name) == 1, std::string("model = matrices needs matrix ") + name);
        }
        require(sample_period > 0.0, "model.sample_period must be positive");
    }
    if (matrices.count("SAFETY")) {
        require(matrices.at("SAFETY").rows() == safety_bounds.size(),
                "safety.bounds needs one entry per SAFETY row");
        for (double b : safety_bounds) require(b > 0.0, "safety.bounds must be positive");
    } else {
        require(safety_bound > 0.0, "safety.bound must be positive");
    }
}

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    bool schedules_touched = false;
    std::istringstream in(text);
    Context ctx;
    std::string raw;
    while (std::getline(in, raw)) {
        ++ctx.line;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.rfind("matrix", 0) == 0 && (line.size() == 6 || line[6] == ' ' || line[6] == '\t')) {
            const auto head = split_ws(line);
            if (head.size() != 4) ctx.fail("expected 'matrix NAME rows cols'");
            const std::string name = head[1];
            static const std::set<std::string> known{"A", "B", "C", "Q", "R", "U", "W", "V", "SAFETY"};
            if (!known.count(name)) ctx.fail("unknown matrix '" + name + "'");
            const auto rows = static_cast<std::size_t>(to_u64(head[2], ctx));
            const auto cols = static_cast<std::size_t>(to_u64(head[3], ctx));
            if (rows == 0 || cols == 0) ctx.fail("matrix dimensions must be positive");
            std::vector<double> data;
            data.reserve(rows * cols);
            bool closed = false;
            while (std::getline(in, raw)) {
                ++ctx.line;
                std::string body = raw;
                if (const auto hash = body.find('#'); hash != std::string::npos) body.resize(hash);
                body = trim(body);
                if (body.empty()) continue;
                if (body == "end") {
                    closed = true;
                    break;
                }
                const auto row = to_vector(body, ctx);
                if (row.size() != cols) ctx.fail("matrix " + name + ": expected " + std::to_string(cols) + " columns");
                data.insert(data.end(), row.begin(), row.end());
            }
            if (!closed) ctx.fail("matrix " + name + ": missing 'end'");
            if (data.size() != rows * cols) ctx.fail("matrix " + name + ": expected " + std::to_string(rows) + " rows");
            c.matrices[name] = Mat(rows, cols, std::move(data));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) ctx.fail("expected 'key = value'");
        apply(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), schedules_touched, ctx);
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    auto kv = [&](const char* key, const std::string& value) { os << key << " = " << value << '\n'; };
    auto num = [&](const char* key, double v) { kv(key, format_double(v)); };
    auto cnt = [&](const char* key, std::uint64_t v) { kv(key, std::to_string(v)); };
    kv("model", model_name(c.model));
    cnt("model.seed", c.model_seed);
    num("model.sample_period", c.sample_period);
    kv("tank.area", join(c.tank.area));
    kv("tank.outlet", join(c.tank.outlet));
    kv("tank.level0", join(c.tank.level0));
    kv("tank.voltage0", join(c.tank.voltage0));
    kv("tank.pump_gain", join(c.tank.pump_gain));
    kv("tank.valve_split", join(c.tank.valve_split));
    num("tank.sensor_gain", c.tank.sensor_gain);
    num("tank.gravity", c.tank.gravity);
    num("tank.sample_period", c.tank.sample_period);
    cnt("detector.window", c.window);
    num("detector.false_alarm", c.false_alarm);
    num("stealth.p_d", c.p_d);
    num("safety.p", c.p);
    num("safety.bound", c.safety_bound);
    kv("safety.bounds", join(c.safety_bounds));
    kv("lmi.p1_scale", c.p1_scale_auto ? std::string("auto") : format_double(c.p1_scale));
    num("lmi.p1_scale_min", c.p1_scale_min);
    num("lmi.p1_scale_max", c.p1_scale_max);
    cnt("lmi.p1_scale_points", c.p1_scale_points);
    num("lmi.alpha1_min", c.lmi.alpha1_min);
    num("lmi.alpha1_max", c.lmi.alpha1_max);
    cnt("lmi.alpha1_points", c.lmi.alpha1_points);
    num("lmi.alpha2_min", c.lmi.alpha2_min);
    num("lmi.alpha2_max", c.lmi.alpha2_max);
    cnt("lmi.alpha2_points", c.lmi.alpha2_points);
    num("lmi.alpha2_margin", c.lmi.alpha2_margin);
    kv("lmi.alpha3_ratios", join(c.lmi.alpha3_ratios));
    num("lmi.gamma_a_cap", c.lmi.gamma_a_cap);
    num("lmi.bisection_tol", c.lmi.bisection_tol);
    kv("lmi.p2_method", p2_name(c.lmi.p2_method));
    num("lmi.barrier_mu_final", c.lmi.barrier_mu_final);
    num("lmi.omega1", c.lmi.omega1);
    num("lmi.omega2", c.lmi.omega2);
    num("lmi.omega3", c.lmi.omega3);
    if (c.schedules.empty()) kv("schedules", "none");
    for (const auto& s : c.schedules) os << "schedule." << s.name << " = " << s.pattern_string() << '\n';
    cnt("sim.horizon", c.horizon);
    cnt("sim.trials", c.trials);
    cnt("sim.seed", c.seed);
    kv("sim.attack", attack_name(c.attack));
    kv("sim.covert_input", join(c.covert_input));
    kv("sim.x0", join(c.x0));
    kv("sim.stationary_start", c.stationary_start ? "true" : "false");
    cnt("sim.threads", c.threads);
    kv("sim.trajectories", c.trajectories ? "true" : "false");
    cnt("sweep.k", c.sweep_k);
    cnt("sweep.ta", c.sweep_ta);
    cnt("sweep.k_max", c.sweep_k_max);
    kv("sweep.p", join(c.sweep_p));
    kv("output.dir", c.out_dir);
    for (const auto& [name, m] : c.matrices) {
        os << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (std::size_t r = 0; r < m.rows(); ++r) {
            for (std::size_t col = 0; col < m.cols(); ++col) os << (col ? " " : "") << format_double(m(r, col));
            os << '\n';
        }
        os << "end\n";
    }
    return os.str();
}

std::string config_hash(const RunConfig& config) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : serialize_config(config)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

} // namespace cpsguard
