#include "hh/scenario.hpp"

#include <cmath>
#include <sstream>

#include "hh/io.hpp"

namespace hh {

namespace {

struct KeyValue {
    std::string value;
    int line = 0;
    mutable bool used = false;
};

using ConfigMap = std::map<std::string, KeyValue>;

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

ConfigMap parse_config(const std::string& text, const std::string& origin) {
    ConfigMap map;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                raise(ErrorCode::ParseError,
                      origin + ":" + std::to_string(lineno) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            raise(ErrorCode::ParseError,
                  origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = section + "." + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (map.count(key))
            raise(ErrorCode::ParseError, origin + ":" + std::to_string(lineno) +
                                             ": duplicate key '" + key + "' (first at line " +
                                             std::to_string(map[key].line) + ")");
        map[key] = KeyValue{value, lineno};
    }
    return map;
}

class Reader {
public:
    Reader(const ConfigMap& map, const std::string& origin) : map_(map), origin_(origin) {}

    bool has(const std::string& key) const { return map_.count(key) > 0; }

    std::string str(const std::string& key, const std::string& fallback) const {
        auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        it->second.used = true;
        return it->second.value;
    }

    double num(const std::string& key, double fallback) {
        auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        it->second.used = true;
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second.value, &pos);
            if (pos != it->second.value.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (...) {
            raise(ErrorCode::ParseError, origin_ + ":" + std::to_string(it->second.line) +
                                             ": '" + key + "' is not a number");
        }
    }

    void two_nums(const std::string& key, double& lo, double& hi) {
        auto it = map_.find(key);
        if (it == map_.end()) return;
        it->second.used = true;
        std::istringstream in(it->second.value);
        if (!(in >> lo >> hi))
            raise(ErrorCode::ParseError, origin_ + ":" + std::to_string(it->second.line) +
                                             ": '" + key + "' needs two numbers");
    }

    void check_all_used(std::vector<std::string>& violations) const {
        for (const auto& [key, kv] : map_)
            if (!kv.used) violations.push_back("unknown key '" + key + "' at line " +
                                               std::to_string(kv.line));
    }

private:
    const ConfigMap& map_;
    std::string origin_;
};

} // namespace

std::vector<Shape> parse_shapes(const std::string& text, int dimension) {
    std::vector<Shape> shapes;
    std::vector<std::string> chunks;
    {
        std::string acc;
        for (char c : text) {
            if (c == '|') {
                chunks.push_back(acc);
                acc.clear();
            } else {
                acc += c;
            }
        }
        chunks.push_back(acc);
    }
    for (const std::string& piece : chunks) {
        std::istringstream in(piece);
        std::string kind;
        if (!(in >> kind)) continue;
        std::vector<double> args;
        double v;
        while (in >> v) args.push_back(v);
        if (kind == "annulus") {
            if (args.size() != 2)
                raise(ErrorCode::ParseError, "annulus needs two radii: '" + piece + "'");
            shapes.push_back(Shape::annulus(args[0], args[1]));
        } else if (kind == "box") {
            if (static_cast<int>(args.size()) != 2 * dimension)
                raise(ErrorCode::ParseError, "box needs lo/hi per axis: '" + piece + "'");
            Eigen::VectorXd lo(dimension), hi(dimension);
            for (int d = 0; d < dimension; ++d) {
                lo[d] = args[2 * d];
                hi[d] = args[2 * d + 1];
            }
            shapes.push_back(Shape::box(lo, hi));
        } else if (kind == "ball") {
            if (static_cast<int>(args.size()) != dimension + 1)
                raise(ErrorCode::ParseError, "ball needs a center and radius: '" + piece + "'");
            Eigen::VectorXd c(dimension);
            for (int d = 0; d < dimension; ++d) c[d] = args[d];
            shapes.push_back(Shape::ball(c, args[dimension]));
        } else {
            raise(ErrorCode::ParseError, "unknown shape '" + kind + "'");
        }
    }
    if (shapes.empty()) raise(ErrorCode::ParseError, "empty region specification");
    return shapes;
}

Scenario parse_scenario_text(const std::string& text, const std::string& origin) {
    const ConfigMap map = parse_config(text, origin);
    Reader r(map, origin);
    Scenario s;
    s.raw_text = text;
    s.source_path = origin;
    s.hash = fnv1a64(text);

    const std::string mode = r.str("grid.mode", "radial3d");
    std::vector<std::string> violations;
    if (mode == "radial3d")
        s.grid.mode = GridMode::radial3d;
    else if (mode == "tensor")
        s.grid.mode = GridMode::tensor;
    else
        violations.push_back("grid.mode must be radial3d or tensor");
    s.grid.extent = r.num("grid.extent", 2.0);
    s.grid.cells_per_axis = static_cast<int>(r.num("grid.cells_per_axis", 32));
    s.grid.dimension = static_cast<int>(r.num("grid.dimension", s.grid.mode == GridMode::radial3d ? 3 : 2));

    s.time.T = r.num("time.T_seconds", 1.0);
    s.time.nt = static_cast<int>(r.num("time.steps", 32));
    const std::string scheme = r.str("time.scheme", "implicit_euler");
    if (scheme == "implicit_euler")
        s.theta = 1.0;
    else if (scheme == "crank_nicolson")
        s.theta = 0.5;
    else
        violations.push_back("time.scheme must be implicit_euler or crank_nicolson");

    s.mu = r.num("problem.mu", 0.0);
    const std::string cs = r.str("problem.case", "shared");
    if (cs == "shared")
        s.case_flag = CaseFlag::shared;
    else if (cs == "distinct")
        s.case_flag = CaseFlag::distinct;
    else
        violations.push_back("problem.case must be shared or distinct");
    s.seed = static_cast<std::uint64_t>(r.num("problem.seed", 42));

    s.alpha1 = r.num("followers.alpha1", 1e3);
    s.alpha2 = r.num("followers.alpha2", 1e3);

    s.regions_leader = r.str("regions.leader", "");
    s.regions_f1 = r.str("regions.follower1", "");
    s.regions_f2 = r.str("regions.follower2", "");
    s.regions_t1 = r.str("regions.target1", "");
    s.regions_t2 = r.str("regions.target2", "");

    s.y0.text = r.str("data.y0", "zero");
    s.ybar0.text = r.str("data.ybar0", "zero");
    s.y1d.text = r.str("data.y1d", "traj");
    s.y2d.text = r.str("data.y2d", "traj");

    s.epsilon = r.num("leader.epsilon", 1e-3);
    const std::string pen = r.str("leader.penalty", "exact_norm");
    if (pen == "exact_norm")
        s.penalty = PenaltyKind::exact_norm;
    else if (pen == "quadratic")
        s.penalty = PenaltyKind::quadratic;
    else
        violations.push_back("leader.penalty must be exact_norm or quadratic");

    s.carleman_s = r.num("carleman.s", 1.0);
    s.carleman_lambda0 = r.num("carleman.lambda0", 1.0);
    r.two_nums("carleman.omega0", s.omega0_lo, s.omega0_hi);
    r.two_nums("carleman.otilde", s.otilde_lo, s.otilde_hi);
    r.two_nums("carleman.omega1", s.omega1_lo, s.omega1_hi);
    r.two_nums("carleman.omega2", s.omega2_lo, s.omega2_hi);

    s.nonlinearity = r.str("semilinear.nonlinearity", "zero");
    s.kappa = r.num("semilinear.kappa", 0.0);

    s.tol.nash = r.num("tolerances.nash", 1e-8);
    s.tol.coupling = r.num("tolerances.coupling", 1e-10);
    s.tol.leader = r.num("tolerances.leader", 1e-9);
    s.tol.outer = r.num("tolerances.outer", 1e-6);

    r.check_all_used(violations);

    // semantic validation; each message names the hypothesis it breaks
    auto guard = [&](auto&& fn, const std::string& label) {
        try {
            fn();
        } catch (const Error& e) {
            violations.push_back(label + ": " + e.what());
        }
    };
    SpatialGrid grid;
    bool grid_ok = false;
    guard([&] { grid = build_grid(s.grid); grid_ok = true; }, "grid");
    guard(
        [&] {
            const double mu_star = hardy_constant(s.grid.mode == GridMode::radial3d
                                                      ? 3
                                                      : s.grid.dimension);
            if (s.mu < 0 || s.mu > mu_star) {
                std::ostringstream os;
                os << "mu = " << s.mu << " outside [0, mu*(N) = " << mu_star
                   << "] (Hardy inequality range)";
                raise(ErrorCode::MuOutOfRange, os.str());
            }
        },
        "problem.mu");
    if (grid_ok) {
        guard(
            [&] {
                RegionGeometry geom;
                geom.leader = parse_shapes(s.regions_leader, grid.dimension);
                geom.follower1 = parse_shapes(s.regions_f1, grid.dimension);
                geom.follower2 = parse_shapes(s.regions_f2, grid.dimension);
                geom.target1 = parse_shapes(s.regions_t1, grid.dimension);
                geom.target2 = parse_shapes(s.regions_t2, grid.dimension);
                geom.case_flag = s.case_flag;
                build_regions(grid, geom);
            },
            "regions");
    }
    guard([&] { validate_scheme(ThetaScheme{s.theta}, s.time); }, "time");
    guard([&] { make_nonlinearity(s.nonlinearity, s.kappa); }, "semilinear");
    if (s.alpha1 <= 0 || s.alpha2 <= 0) violations.push_back("followers: alpha_i must be positive");
    if (s.epsilon <= 0) violations.push_back("leader.epsilon must be positive");
    if (s.mu > 0 && s.grid.mode == GridMode::tensor && s.grid.dimension == 2)
        violations.push_back(
            "problem.mu: N = 2 forces mu = 0 (mu*(2) = 0); tensor N=2 runs are classical-heat baselines");

    if (!violations.empty()) {
        std::string msg = "scenario '" + origin + "' violates:";
        for (const auto& v : violations) msg += "\n  - " + v;
        raise(ErrorCode::ValidationError, msg);
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    return parse_scenario_text(read_text(path), path.string());
}

Eigen::VectorXd eval_spatial(const SpatialExpr& e, const SpatialGrid& grid,
                             const DiscreteOperator& op) {
    std::istringstream in(e.text);
    std::string kind;
    in >> kind;
    const Eigen::Index n = grid.cells();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    if (kind == "zero") return out;
    if (kind == "constant") {
        double v;
        if (!(in >> v)) raise(ErrorCode::ParseError, "constant needs a value");
        out.setConstant(v);
        return out;
    }
    if (kind == "eigenmode") {
        double amp = 1.0;
        in >> amp;
        auto est = smallest_eigenvalue(op);
        Eigen::VectorXd mode = est.vector;
        mode /= norm_x(mode, op.mass);
        if (mode[0] < 0) mode = -mode;
        return amp * mode;
    }
    if (kind == "gaussian") {
        double amp, width, rc;
        if (!(in >> amp >> width >> rc))
            raise(ErrorCode::ParseError, "gaussian needs amp width r_center");
        for (Eigen::Index j = 0; j < n; ++j)
            out[j] = amp * std::exp(-std::pow((grid.radius[j] - rc) / width, 2));
        return out;
    }
    if (kind == "bump") {
        double amp, r0, r1;
        if (!(in >> amp >> r0 >> r1)) raise(ErrorCode::ParseError, "bump needs amp r0 r1");
        for (Eigen::Index j = 0; j < n; ++j) {
            const double t = (2 * grid.radius[j] - r0 - r1) / (r1 - r0);
            if (std::abs(t) < 1.0) out[j] = amp * std::exp(1.0 - 1.0 / (1.0 - t * t));
        }
        return out;
    }
    if (kind == "poly") {
        std::vector<double> c;
        double v;
        while (in >> v) c.push_back(v);
        if (c.empty()) raise(ErrorCode::ParseError, "poly needs coefficients");
        for (Eigen::Index j = 0; j < n; ++j) {
            double acc = 0, p = 1;
            for (double ck : c) {
                acc += ck * p;
                p *= grid.radius[j];
            }
            out[j] = acc;
        }
        return out;
    }
    if (kind == "file") {
        std::string path;
        if (!(in >> path)) raise(ErrorCode::ParseError, "file needs a path");
        return load_vector(path, grid);
    }
    raise(ErrorCode::ParseError, "unknown spatial expression '" + kind + "'");
}

namespace {

Field eval_target(const TargetExpr& e, const SpatialGrid& grid, const DiscreteOperator& op,
                  const Field& ybar) {
    std::istringstream in(e.text);
    std::string kind;
    in >> kind;
    const TimeGrid tg = ybar.time;
    if (kind == "traj") return ybar;
    if (kind == "file") {
        std::string path;
        if (!(in >> path)) raise(ErrorCode::ParseError, "file needs a path");
        Field f = load_field(path, grid);
        check_same_shape(f, ybar);
        return f;
    }
    if (kind == "fixed") {
        std::string rest;
        std::getline(in, rest);
        const Eigen::VectorXd v = eval_spatial(SpatialExpr{trim(rest)}, grid, op);
        Field f(grid.cells(), tg);
        for (int n2 = 0; n2 <= tg.nt; ++n2) f.v.col(n2) = v;
        return f;
    }
    if (kind == "offset" || kind == "window") {
        double p;
        if (!(in >> p)) raise(ErrorCode::ParseError, kind + " needs a time power");
        std::string rest;
        std::getline(in, rest);
        const Eigen::VectorXd v = eval_spatial(SpatialExpr{trim(rest)}, grid, op);
        Field f = ybar;
        for (int n2 = 0; n2 <= tg.nt; ++n2) {
            const double t = n2 * tg.dt();
            const double w = (kind == "offset")
                                 ? std::pow(tg.T - t, p)
                                 : std::pow(4.0 * t * (tg.T - t) / (tg.T * tg.T), p);
            f.v.col(n2) += w * v;
        }
        return f;
    }
    raise(ErrorCode::ParseError, "unknown target expression '" + kind + "'");
}

} // namespace

CoupledSetup Workspace::coupled() const {
    CoupledSetup c;
    c.state = prop.get();
    c.adj = prop.get();
    c.regions = &regions;
    c.alpha1 = scenario.alpha1;
    c.alpha2 = scenario.alpha2;
    c.z0 = z0;
    c.zd1 = zd1;
    c.zd2 = zd2;
    return c;
}

SemilinearSetup Workspace::semilinear() const {
    SemilinearSetup s;
    s.op = &op;
    s.regions = &regions;
    s.time = scenario.time;
    s.alpha1 = scenario.alpha1;
    s.alpha2 = scenario.alpha2;
    s.y0 = y0;
    s.ybar0 = ybar0;
    s.y1d = y1d;
    s.y2d = y2d;
    s.nl = nl;
    return s;
}

namespace {

/// Default critical shell: the largest shell inside O cap O_{1,d}, shrunk by
/// one cell (falls back to the bare intersection shell on very coarse grids).
void default_omega0(const SpatialGrid& grid, const RegionSet& regions, double& lo, double& hi) {
    double rmin = 1e300, rmax = 0;
    for (Eigen::Index j : regions.target1.cells)
        if (regions.leader.w[j] > 0.5) {
            rmin = std::min(rmin, grid.radius[j]);
            rmax = std::max(rmax, grid.radius[j]);
        }
    lo = rmin + grid.h;
    hi = rmax - grid.h;
    if (hi <= lo) {
        lo = rmin - 0.5 * grid.h;
        hi = rmax + 0.5 * grid.h;
    }
}

} // namespace

Mask Workspace::omega0_mask() const {
    double lo = scenario.omega0_lo, hi = scenario.omega0_hi;
    if (hi <= lo) default_omega0(grid, regions, lo, hi);
    return make_mask(grid, {Shape::annulus(lo, hi)});
}

CarlemanWeightSet Workspace::weights() const {
    double lo = scenario.omega0_lo, hi = scenario.omega0_hi;
    if (hi <= lo) default_omega0(grid, regions, lo, hi);
    if (scenario.case_flag == CaseFlag::shared) {
        PsiSingleSpec ps;
        ps.omega0_lo = lo;
        ps.omega0_hi = hi;
        const auto psi = build_psi(grid, ps);
        return build_weights(grid, psi, nullptr, CaseFlag::shared, scenario.carleman_s,
                             scenario.carleman_lambda0, scenario.time);
    }
    PsiPairSpec pp;
    pp.otilde_lo = scenario.otilde_lo;
    pp.otilde_hi = scenario.otilde_hi;
    pp.w1_lo = scenario.omega1_lo;
    pp.w1_hi = scenario.omega1_hi;
    pp.w2_lo = scenario.omega2_lo;
    pp.w2_hi = scenario.omega2_hi;
    if (pp.otilde_hi <= pp.otilde_lo || pp.w1_hi <= pp.w1_lo || pp.w2_hi <= pp.w2_lo)
        raise(ErrorCode::InvalidArgument,
              "distinct-case weights need carleman.otilde/omega1/omega2 shells in the scenario");
    const auto [p1, p2] = build_psi(grid, pp);
    return build_weights(grid, p1, &p2, CaseFlag::distinct, scenario.carleman_s,
                         scenario.carleman_lambda0, scenario.time);
}

std::unique_ptr<Workspace> build_workspace(const Scenario& s) {
    auto w = std::make_unique<Workspace>();
    w->scenario = s;
    w->grid = build_grid(s.grid);

    RegionGeometry geom;
    geom.leader = parse_shapes(s.regions_leader, w->grid.dimension);
    geom.follower1 = parse_shapes(s.regions_f1, w->grid.dimension);
    geom.follower2 = parse_shapes(s.regions_f2, w->grid.dimension);
    geom.target1 = parse_shapes(s.regions_t1, w->grid.dimension);
    geom.target2 = parse_shapes(s.regions_t2, w->grid.dimension);
    geom.case_flag = s.case_flag;
    w->regions = build_regions(w->grid, geom);

    w->op = assemble(w->grid, s.mu);
    w->prop = std::make_unique<Propagator>(w->op, s.time, ThetaScheme{s.theta});
    w->nl = make_nonlinearity(s.nonlinearity, s.kappa);

    w->y0 = eval_spatial(s.y0, w->grid, w->op);
    w->ybar0 = eval_spatial(s.ybar0, w->grid, w->op);
    w->ybar = solve_semilinear_forward(*w->prop, w->nl, w->ybar0);
    w->y1d = eval_target(s.y1d, w->grid, w->op, w->ybar);
    w->y2d = eval_target(s.y2d, w->grid, w->op, w->ybar);

    w->z0 = w->y0 - w->ybar0;
    w->zd1 = w->y1d - w->ybar;
    w->zd2 = w->y2d - w->ybar;
    return w;
}

} // namespace hh
