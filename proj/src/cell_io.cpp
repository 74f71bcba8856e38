#include "homog/cell.hpp"
#include "homog/error.hpp"

#include <json.hpp>

#include <fstream>

namespace homog {

namespace {

using nlohmann::json;

json tensor_A(const HomogenizedTensors& t) {
    json out = json::array();
    for (int i = 0; i < t.dim; ++i) {
        json row = json::array();
        for (int j = 0; j < t.dim; ++j) {
            json block = json::array();
            for (int a = 0; a < t.m; ++a) {
                json r = json::array();
                for (int b = 0; b < t.m; ++b) r.push_back(t.a(i, j, a, b));
                block.push_back(r);
            }
            row.push_back(block);
        }
        out.push_back(row);
    }
    return out;
}

json tensor_vec(const std::vector<double>& v, int dim, int m) {
    json out = json::array();
    for (int i = 0; i < dim; ++i) {
        json block = json::array();
        for (int a = 0; a < m; ++a) {
            json r = json::array();
            for (int b = 0; b < m; ++b) r.push_back(v[static_cast<std::size_t>((i * m + a) * m + b)]);
            block.push_back(r);
        }
        out.push_back(block);
    }
    return out;
}

json tensor_mat(const std::vector<double>& v, int m) {
    json out = json::array();
    for (int a = 0; a < m; ++a) {
        json r = json::array();
        for (int b = 0; b < m; ++b) r.push_back(v[static_cast<std::size_t>(a * m + b)]);
        out.push_back(r);
    }
    return out;
}

json tensors(const HomogenizedTensors& t) {
    return json{{"A", tensor_A(t)}, {"V", tensor_vec(t.V, t.dim, t.m)}, {"B", tensor_vec(t.B, t.dim, t.m)},
                {"c", tensor_mat(t.c, t.m)}, {"lambda", t.lambda}};
}

HomogenizedTensors read_tensors(const json& j, int dim, int m) {
    HomogenizedTensors t;
    t.dim = dim;
    t.m = m;
    t.lambda = j.at("lambda").get<double>();
    t.A.assign(static_cast<std::size_t>(dim * dim * m * m), 0.0);
    t.V.assign(static_cast<std::size_t>(dim * m * m), 0.0);
    t.B.assign(static_cast<std::size_t>(dim * m * m), 0.0);
    t.c.assign(static_cast<std::size_t>(m * m), 0.0);
    for (int i = 0; i < dim; ++i)
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                for (int jj = 0; jj < dim; ++jj)
                    t.A[static_cast<std::size_t>(((i * dim + jj) * m + a) * m + b)] = j.at("A").at(i).at(jj).at(a).at(b).get<double>();
                t.V[static_cast<std::size_t>((i * m + a) * m + b)] = j.at("V").at(i).at(a).at(b).get<double>();
                t.B[static_cast<std::size_t>((i * m + a) * m + b)] = j.at("B").at(i).at(a).at(b).get<double>();
            }
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) t.c[static_cast<std::size_t>(a * m + b)] = j.at("c").at(a).at(b).get<double>();
    return t;
}

json family(const std::vector<MatrixField>& fam) {
    json out = json::array();
    for (const auto& mf : fam) {
        json entries = json::array();
        for (const auto& f : mf) entries.push_back(f);
        out.push_back(entries);
    }
    return out;
}

std::vector<MatrixField> read_family(const json& j, std::size_t count, std::size_t mm, std::size_t n) {
    if (!j.is_array() || j.size() != count) throw ValidationError("cell bundle: field family has the wrong length");
    std::vector<MatrixField> out(count);
    for (std::size_t q = 0; q < count; ++q) {
        const auto& entries = j.at(q);
        if (entries.size() != mm) throw ValidationError("cell bundle: matrix field has the wrong size");
        for (std::size_t e = 0; e < mm; ++e) {
            auto f = entries.at(e).get<PeriodicArray>();
            if (f.size() != n) throw ValidationError("cell bundle: field length does not match the grid");
            out[q].push_back(std::move(f));
        }
    }
    return out;
}

}  // namespace

void save_cell_data(const CellData& cell, const std::string& path) {
    json j;
    j["format"] = "homog.celldata";
    j["version"] = 1;
    j["dim"] = cell.dim;
    j["m"] = cell.m;
    j["N"] = cell.grid.N;
    j["lambda"] = cell.lambda;
    j["preset"] = cell.preset;
    j["layout"] = "row-major (k1,...,kd); matrix entries (alpha,gamma) at alpha*m+gamma";
    j["hats"] = tensors(cell.hats);
    j["hats_star"] = tensors(cell.hats_star);
    j["divergence_residual"] = cell.divergence_residual;
    j["divergence_warning"] = cell.divergence_warning;
    json f;
    f["chi"] = family(cell.chi);
    f["chi_star"] = family(cell.chi_star);
    f["b"] = family(cell.b);
    f["W"] = family(cell.W);
    f["theta"] = family(cell.theta);
    f["Pi"] = family(cell.Pi);
    f["E"] = family(cell.E);
    j["fields"] = std::move(f);
    std::ofstream os(path);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    os << j.dump();
    if (!os) throw Error("failed writing '" + path + "'");
}

CellData load_cell_data(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open cell bundle '" + path + "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("cell bundle is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "homog.celldata") throw ValidationError("not a cell bundle");
        CellData cell;
        cell.dim = j.at("dim").get<int>();
        cell.m = j.at("m").get<int>();
        cell.grid = CellGrid{cell.dim, j.at("N").get<int>()};
        cell.grid.check();
        cell.lambda = j.at("lambda").get<double>();
        cell.preset = j.value("preset", std::string());
        cell.hats = read_tensors(j.at("hats"), cell.dim, cell.m);
        cell.hats_star = read_tensors(j.at("hats_star"), cell.dim, cell.m);
        cell.divergence_residual = j.value("divergence_residual", 0.0);
        cell.divergence_warning = j.value("divergence_warning", false);
        const auto& f = j.at("fields");
        const std::size_t d = static_cast<std::size_t>(cell.dim);
        const std::size_t mm = static_cast<std::size_t>(cell.m * cell.m);
        const std::size_t n = cell.grid.size();
        cell.chi = read_family(f.at("chi"), d + 1, mm, n);
        cell.chi_star = read_family(f.at("chi_star"), d + 1, mm, n);
        cell.b = read_family(f.at("b"), d * (d + 1), mm, n);
        cell.W = read_family(f.at("W"), d + 1, mm, n);
        cell.theta = read_family(f.at("theta"), d + 1, mm, n);
        cell.Pi = read_family(f.at("Pi"), d * (d + 1), mm, n);
        cell.E = read_family(f.at("E"), d * d * (d + 1), mm, n);
        compute_derived_fields(cell);
        return cell;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed cell bundle: ") + e.what());
    }
}

std::string tensors_json(const HomogenizedTensors& t) { return tensors(t).dump(2); }

}  // namespace homog
