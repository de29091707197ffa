#include "features.hpp"

#include <charconv>
#include <cmath>

#include "errors.hpp"

namespace aqua {

std::optional<double> norm_ratio(double r_i, double r_j) {
    double denom = r_i + r_j;
    if (denom == 0.0) return std::nullopt;
    return (r_i - r_j) / denom;
}

std::optional<double> three_band(double r_i, double r_j, double r_k) {
    if (r_i == 0.0 || r_j == 0.0) return std::nullopt;
    return (1.0 / r_i - 1.0 / r_j) * r_k;
}

double line_height(double r_i, double r_j, double r_k, double lambda_i, double lambda_j,
                   double lambda_k) {
    if (!(lambda_i < lambda_j && lambda_j < lambda_k)) {
        throw ConfigError("line_height: wavelengths must be strictly increasing");
    }
    return r_j - r_i - (r_k - r_i) * (lambda_j - lambda_i) / (lambda_k - lambda_i);
}

namespace {

bool consecutive_triple(BandId a, BandId b, BandId c) {
    auto i = band_index(a);
    return band_index(b) == i + 1 && band_index(c) == i + 2;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

std::string FeatureExpr::name() const {
    switch (kind) {
        case Kind::Band:
            return band_name(a);
        case Kind::Power:
            return "(" + band_name(a) + ")^" + std::to_string(exponent);
        case Kind::NormRatio:
            return "NR(" + band_name(a) + "," + band_name(b) + ")";
        case Kind::ThreeBand:
            return "TB(" + band_name(a) + "," + band_name(b) + "," + band_name(c) + ")";
        case Kind::LineHeight:
            return "LH(" + band_name(a) + "," + band_name(b) + "," + band_name(c) + ")";
    }
    return "";
}

double FeatureExpr::eval(const Spectrum& s, bool* undefined) const {
    switch (kind) {
        case Kind::Band:
            return s[a];
        case Kind::Power: {
            double v = s[a];
            return exponent == 2 ? v * v : v * v * v;
        }
        case Kind::NormRatio: {
            auto v = norm_ratio(s[a], s[b]);
            if (!v) {
                if (undefined) *undefined = true;
                return 0.0;
            }
            return *v;
        }
        case Kind::ThreeBand: {
            auto v = three_band(s[a], s[b], s[c]);
            if (!v) {
                if (undefined) *undefined = true;
                return 0.0;
            }
            return *v;
        }
        case Kind::LineHeight:
            return line_height(s[a], s[b], s[c], central_wavelength_nm(a),
                               central_wavelength_nm(b), central_wavelength_nm(c));
    }
    return 0.0;
}

namespace {

BandId parse_band_token(const std::string& token) {
    auto b = band_from_name(token);
    if (!b) {
        throw DataError("parse_feature: unknown or excluded band token '" + token + "'");
    }
    return *b;
}

// Splits "X(Ba,Bb[,Bc])" arguments.
std::vector<std::string> parse_args(const std::string& name, std::size_t open) {
    if (name.back() != ')') {
        throw DataError("parse_feature: malformed expression '" + name + "'");
    }
    std::string inner = name.substr(open + 1, name.size() - open - 2);
    std::vector<std::string> args;
    std::string cur;
    for (char ch : inner) {
        if (ch == ',') {
            args.push_back(cur);
            cur.clear();
        } else if (ch != ' ') {
            cur += ch;
        }
    }
    args.push_back(cur);
    return args;
}

}  // namespace

FeatureExpr parse_feature(const std::string& name) {
    if (name.empty()) {
        throw DataError("parse_feature: empty name");
    }

    FeatureExpr e;
    if (name[0] == 'B') {
        e.kind = FeatureExpr::Kind::Band;
        e.a = parse_band_token(name);
        return e;
    }
    if (name[0] == '(') {
        auto close = name.find(')');
        if (close == std::string::npos || close + 2 >= name.size() || name[close + 1] != '^') {
            throw DataError("parse_feature: malformed power expression '" + name + "'");
        }
        e.kind = FeatureExpr::Kind::Power;
        e.a = parse_band_token(name.substr(1, close - 1));
        std::string exp = name.substr(close + 2);
        if (exp == "2") {
            e.exponent = 2;
        } else if (exp == "3") {
            e.exponent = 3;
        } else {
            throw DataError("parse_feature: exponent must be 2 or 3 in '" + name + "'");
        }
        return e;
    }

    auto open = name.find('(');
    if (open == std::string::npos) {
        throw DataError("parse_feature: unrecognized expression '" + name + "'");
    }
    std::string head = name.substr(0, open);
    auto args = parse_args(name, open);

    if (head == "NR") {
        if (args.size() != 2) {
            throw DataError("parse_feature: NR takes two bands in '" + name + "'");
        }
        e.kind = FeatureExpr::Kind::NormRatio;
        e.a = parse_band_token(args[0]);
        e.b = parse_band_token(args[1]);
        if (e.a == e.b) {
            throw DataError("parse_feature: NR bands must differ in '" + name + "'");
        }
        return e;
    }
    if (head == "TB" || head == "LH") {
        if (args.size() != 3) {
            throw DataError("parse_feature: " + head + " takes three bands in '" + name + "'");
        }
        e.kind = head == "TB" ? FeatureExpr::Kind::ThreeBand : FeatureExpr::Kind::LineHeight;
        e.a = parse_band_token(args[0]);
        e.b = parse_band_token(args[1]);
        e.c = parse_band_token(args[2]);
        if (!consecutive_triple(e.a, e.b, e.c)) {
            throw DataError("parse_feature: " + head +
                            " requires three consecutive retained bands in '" + name + "'");
        }
        return e;
    }
    throw DataError("parse_feature: unrecognized expression '" + name + "'");
}

std::vector<FeatureExpr> enumerate_candidates() {
    std::vector<FeatureExpr> out;
    out.reserve(136);
    for (BandId b : kAllBands) {
        out.push_back({FeatureExpr::Kind::Band, b});
    }
    for (int exp : {2, 3}) {
        for (BandId b : kAllBands) {
            FeatureExpr e;
            e.kind = FeatureExpr::Kind::Power;
            e.a = b;
            e.exponent = exp;
            out.push_back(e);
        }
    }
    // Ordered pairs: antisymmetric duplicates are correlation-equivalent
    // and de-duplicated downstream by the selection step.
    for (BandId i : kAllBands) {
        for (BandId j : kAllBands) {
            if (i == j) continue;
            FeatureExpr e;
            e.kind = FeatureExpr::Kind::NormRatio;
            e.a = i;
            e.b = j;
            out.push_back(e);
        }
    }
    for (auto kind : {FeatureExpr::Kind::ThreeBand, FeatureExpr::Kind::LineHeight}) {
        for (std::size_t i = 0; i + 2 < kBandCount; ++i) {
            FeatureExpr e;
            e.kind = kind;
            e.a = kAllBands[i];
            e.b = kAllBands[i + 1];
            e.c = kAllBands[i + 2];
            out.push_back(e);
        }
    }
    return out;
}

std::vector<FeatureExpr> parse_feature_list(const std::vector<std::string>& names,
                                            std::size_t* duplicates_dropped) {
    std::vector<FeatureExpr> out;
    std::size_t dropped = 0;
    for (const auto& n : names) {
        FeatureExpr e = parse_feature(n);
        bool dup = false;
        for (const auto& seen : out) {
            if (seen == e) {
                dup = true;
                break;
            }
        }
        if (dup) {
            ++dropped;
        } else {
            out.push_back(e);
        }
    }
    if (duplicates_dropped) *duplicates_dropped = dropped;
    return out;
}

std::vector<double> FeatureMatrix::column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        out[r] = at(r, c);
    }
    return out;
}

FeatureMatrix evaluate_features(const MatchupTable& table, const std::vector<FeatureExpr>& exprs,
                                FeatureEvalLog* log) {
    if (table.records.empty()) {
        throw DataError("evaluate_features: empty table");
    }
    FeatureMatrix m;
    m.rows = table.records.size();
    m.cols = exprs.size();
    m.values.resize(m.rows * m.cols);
    m.names.reserve(exprs.size());
    for (const auto& e : exprs) {
        m.names.push_back(e.name());
    }
    std::size_t undefined_count = 0;
    for (std::size_t r = 0; r < m.rows; ++r) {
        const auto& rec = table.records[r];
        m.stations.push_back(rec.station_id);
        m.dates.push_back(rec.timestamp);
        for (std::size_t c = 0; c < m.cols; ++c) {
            bool undefined = false;
            m.values[r * m.cols + c] = exprs[c].eval(rec.spectrum, &undefined);
            if (undefined) ++undefined_count;
        }
    }
    if (log) log->undefined_substitutions = undefined_count;
    return m;
}

std::string feature_matrix_csv(const FeatureMatrix& m) {
    std::string out = "station_id,date";
    for (const auto& n : m.names) {
        out += ',';
        out += n;
    }
    out += '\n';
    for (std::size_t r = 0; r < m.rows; ++r) {
        out += m.stations[r];
        out += ',';
        out += m.dates[r].iso();
        for (std::size_t c = 0; c < m.cols; ++c) {
            out += ',';
            out += format_double(m.at(r, c));
        }
        out += '\n';
    }
    return out;
}

}  // namespace aqua
