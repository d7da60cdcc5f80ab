#include "opsheaf/model_io.hpp"

#include "opsheaf/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace opsheaf {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void schema(const std::string& path, const std::string& what)
{
    throw SchemaError(path + ": " + what);
}

const char* type_name(const Json& j)
{
    return j.type_name();
}

void only_keys(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed)
{
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) {
            ok = ok || it.key() == k;
        }
        if (!ok) {
            schema(path + "." + it.key(), "unknown field");
        }
    }
}

const Json& object(const Json& j, const std::string& path)
{
    if (!j.is_object()) {
        schema(path, std::string("expected an object, found ") + type_name(j));
    }
    return j;
}

const Json& array(const Json& j, const std::string& path)
{
    if (!j.is_array()) {
        schema(path, std::string("expected an array, found ") + type_name(j));
    }
    return j;
}

const Json& field(const Json& obj, const char* key, const std::string& path)
{
    object(obj, path);
    auto it = obj.find(key);
    if (it == obj.end()) {
        schema(path + "." + key, "missing required field");
    }
    return *it;
}

std::string string_at(const Json& obj, const char* key, const std::string& path)
{
    const Json& j = field(obj, key, path);
    if (!j.is_string()) {
        schema(path + "." + key, std::string("expected a string, found ") + type_name(j));
    }
    return j.get<std::string>();
}

Eigen::Index count_at(const Json& obj, const char* key, const std::string& path)
{
    const Json& j = field(obj, key, path);
    if (!j.is_number_integer() || j.get<long long>() < 0) {
        schema(path + "." + key, "expected a nonnegative integer");
    }
    return static_cast<Eigen::Index>(j.get<long long>());
}

double number(const Json& j, const std::string& path)
{
    if (!j.is_number()) {
        schema(path, std::string("expected a number, found ") + type_name(j));
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        schema(path, "number is not finite");
    }
    return v;
}

Vector numbers(const Json& j, const std::string& path)
{
    array(j, path);
    Vector out(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = number(j[i], path + "[" + std::to_string(i) + "]");
    }
    return out;
}

Matrix matrix_at(const Json& obj, const std::string& path)
{
    const Eigen::Index rows = count_at(obj, "rows", path);
    const Eigen::Index cols = count_at(obj, "cols", path);
    const Vector data = numbers(field(obj, "data", path), path + ".data");
    if (data.size() != rows * cols) {
        schema(path + ".data", "has " + std::to_string(data.size()) + " entries, expected rows*cols = "
                                   + std::to_string(rows * cols));
    }
    return unflatten_row_major({data.data(), static_cast<std::size_t>(data.size())}, rows, cols);
}

Json matrix_json(const Matrix& m)
{
    Json j = Json::object();
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    Json data = Json::array();
    const Vector flat = flatten_row_major(m);
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        data.push_back(flat[i]);
    }
    j["data"] = std::move(data);
    return j;
}

Json vector_json(const Vector& v)
{
    Json data = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        data.push_back(v[i]);
    }
    return data;
}

VertexIndex vertex_ref(const Graph& g, const Json& obj, const char* key, const std::string& path)
{
    const std::string id = string_at(obj, key, path);
    try {
        return g.vertex_index(id);
    } catch (const ValidationError&) {
        schema(path + "." + key, "unknown vertex '" + id + "'");
    }
}

EdgeIndex edge_ref(const Graph& g, const Json& obj, const char* key, const std::string& path)
{
    const std::string id = string_at(obj, key, path);
    try {
        return g.edge_index(id);
    } catch (const ValidationError&) {
        schema(path + "." + key, "unknown edge '" + id + "'");
    }
}

std::vector<Incidence> incidence_list(const Graph& g, const Json& j, const std::string& path)
{
    array(j, path);
    std::vector<Incidence> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        object(j[i], p);
        only_keys(j[i], p, {"vertex", "edge"});
        const Incidence inc{vertex_ref(g, j[i], "vertex", p), edge_ref(g, j[i], "edge", p)};
        if (!g.is_incident(inc.vertex, inc.edge)) {
            throw ValidationError(p + ": vertex '" + g.vertex_id(inc.vertex) + "' is not an endpoint of edge '"
                                  + g.edge(inc.edge).id + "'");
        }
        out.push_back(inc);
    }
    return out;
}

Json incidence_json(const Graph& g, const std::vector<Incidence>& incs)
{
    Json arr = Json::array();
    for (const auto& inc : incs) {
        Json j = Json::object();
        j["vertex"] = g.vertex_id(inc.vertex);
        j["edge"] = g.edge(inc.edge).id;
        arr.push_back(std::move(j));
    }
    return arr;
}

Model parse_document(const Json& doc)
{
    const std::string root = "$";
    object(doc, root);
    only_keys(doc, root,
              {"format", "version", "vertices", "edges", "restrictions", "opinion", "stubborn", "adaptation",
               "policies", "parameters"});
    if (string_at(doc, "format", root) != kModelFormat) {
        schema("$.format", "expected '" + std::string(kModelFormat) + "'");
    }
    if (count_at(doc, "version", root) != kModelVersion) {
        schema("$.version", "unsupported version (expected " + std::to_string(kModelVersion) + ")");
    }

    // Graph and stalk dimensions.
    const Json& vertices = array(field(doc, "vertices", root), "$.vertices");
    std::vector<std::string> vids;
    std::vector<Eigen::Index> vdims;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const std::string p = "$.vertices[" + std::to_string(i) + "]";
        object(vertices[i], p);
        only_keys(vertices[i], p, {"id", "dim"});
        vids.push_back(string_at(vertices[i], "id", p));
        vdims.push_back(count_at(vertices[i], "dim", p));
        if (std::find(vids.begin(), vids.end() - 1, vids.back()) != vids.end() - 1) {
            schema(p + ".id", "duplicate vertex id '" + vids.back() + "'");
        }
    }
    Graph vertex_only(vids, {});
    const Json& edges = array(field(doc, "edges", root), "$.edges");
    std::vector<Edge> es;
    std::vector<Eigen::Index> edims;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const std::string p = "$.edges[" + std::to_string(i) + "]";
        object(edges[i], p);
        only_keys(edges[i], p, {"id", "tail", "head", "dim"});
        Edge e{string_at(edges[i], "id", p), vertex_ref(vertex_only, edges[i], "tail", p),
               vertex_ref(vertex_only, edges[i], "head", p)};
        if (e.tail == e.head) {
            schema(p, "self-loop at vertex '" + vids[e.tail] + "'");
        }
        for (const auto& prev : es) {
            if (prev.id == e.id) {
                schema(p + ".id", "duplicate edge id '" + e.id + "'");
            }
        }
        es.push_back(std::move(e));
        edims.push_back(count_at(edges[i], "dim", p));
    }
    Graph graph(vids, es);

    // Restriction maps: exactly one per incidence, explicit shapes.
    const Json& restrictions = array(field(doc, "restrictions", root), "$.restrictions");
    std::map<Incidence, Matrix> maps;
    for (std::size_t i = 0; i < restrictions.size(); ++i) {
        const std::string p = "$.restrictions[" + std::to_string(i) + "]";
        object(restrictions[i], p);
        only_keys(restrictions[i], p, {"vertex", "edge", "rows", "cols", "data"});
        const Incidence inc{vertex_ref(graph, restrictions[i], "vertex", p), edge_ref(graph, restrictions[i], "edge", p)};
        if (!graph.is_incident(inc.vertex, inc.edge)) {
            throw ValidationError(p + ": vertex '" + vids[inc.vertex] + "' is not an endpoint of edge '"
                                  + es[inc.edge].id + "'");
        }
        Matrix m = matrix_at(restrictions[i], p);
        if (m.rows() != edims[inc.edge] || m.cols() != vdims[inc.vertex]) {
            throw ConformanceError(p + ": restriction (" + vids[inc.vertex] + ", " + es[inc.edge].id + ") is "
                                   + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected "
                                   + std::to_string(edims[inc.edge]) + "x" + std::to_string(vdims[inc.vertex]));
        }
        if (!maps.emplace(inc, std::move(m)).second) {
            schema(p, "duplicate restriction for (" + vids[inc.vertex] + ", " + es[inc.edge].id + ")");
        }
    }
    std::vector<Matrix> tails;
    std::vector<Matrix> heads;
    for (EdgeIndex e = 0; e < es.size(); ++e) {
        for (VertexIndex v : {es[e].tail, es[e].head}) {
            if (!maps.contains({v, e})) {
                schema("$.restrictions", "missing restriction for (" + vids[v] + ", " + es[e].id + ")");
            }
        }
        tails.push_back(maps.at({es[e].tail, e}));
        heads.push_back(maps.at({es[e].head, e}));
    }
    Model model{Sheaf(graph, vdims, edims, std::move(tails), std::move(heads)), {}, {}, {}, false, {}, {}};
    const Sheaf& sheaf = model.sheaf;

    if (auto it = doc.find("opinion"); it != doc.end()) {
        const Json& op = array(*it, "$.opinion");
        std::vector<std::optional<Vector>> blocks(graph.vertex_count());
        for (std::size_t i = 0; i < op.size(); ++i) {
            const std::string p = "$.opinion[" + std::to_string(i) + "]";
            object(op[i], p);
            only_keys(op[i], p, {"vertex", "values"});
            const VertexIndex v = vertex_ref(graph, op[i], "vertex", p);
            Vector vals = numbers(field(op[i], "values", p), p + ".values");
            if (vals.size() != vdims[v]) {
                throw ConformanceError(p + ".values: length " + std::to_string(vals.size())
                                       + " does not match stalk dimension " + std::to_string(vdims[v]));
            }
            if (blocks[v]) {
                schema(p, "duplicate opinion for vertex '" + vids[v] + "'");
            }
            blocks[v] = std::move(vals);
        }
        std::vector<Vector> full;
        for (VertexIndex v = 0; v < blocks.size(); ++v) {
            if (!blocks[v]) {
                schema("$.opinion", "missing opinion for vertex '" + vids[v] + "'");
            }
            full.push_back(*blocks[v]);
        }
        model.opinion = make_cochain0(sheaf, full);
    }

    if (auto it = doc.find("stubborn"); it != doc.end()) {
        const Json& st = array(*it, "$.stubborn");
        StubbornSpec spec = StubbornSpec::none(sheaf);
        std::set<VertexIndex> seen;
        for (std::size_t i = 0; i < st.size(); ++i) {
            const std::string p = "$.stubborn[" + std::to_string(i) + "]";
            object(st[i], p);
            only_keys(st[i], p, {"vertex", "basis", "values"});
            const VertexIndex v = vertex_ref(graph, st[i], "vertex", p);
            if (!seen.insert(v).second) {
                schema(p, "duplicate stubborn entry for vertex '" + vids[v] + "'");
            }
            object(field(st[i], "basis", p), p + ".basis");
            only_keys(st[i]["basis"], p + ".basis", {"rows", "cols", "data"});
            spec.basis[v] = matrix_at(st[i]["basis"], p + ".basis");
            spec.values[v] = numbers(field(st[i], "values", p), p + ".values");
            try {
                StubbornSpec single = StubbornSpec::none(sheaf);
                single.basis[v] = spec.basis[v];
                single.values[v] = spec.values[v];
                single.validate(sheaf);
            } catch (const ConformanceError& e) {
                throw ConformanceError(p + ": " + e.what());
            } catch (const ValidationError& e) {
                throw ValidationError(p + ": " + e.what());
            }
        }
        model.stubborn = std::move(spec);
    }

    if (auto it = doc.find("adaptation"); it != doc.end()) {
        const std::string p = "$.adaptation";
        object(*it, p);
        only_keys(*it, p, {"adapting", "frozen"});
        const bool has_a = it->contains("adapting");
        const bool has_f = it->contains("frozen");
        if (has_a == has_f) {
            schema(p, "exactly one of 'adapting' or 'frozen' is required");
        }
        if (has_a) {
            model.adaptation = AdaptationSpec(graph, incidence_list(graph, (*it)["adapting"], p + ".adapting"));
        } else {
            model.adaptation = AdaptationSpec::from_frozen(graph, incidence_list(graph, (*it)["frozen"], p + ".frozen"));
            model.adaptation_frozen = true;
        }
    }

    if (auto it = doc.find("policies"); it != doc.end()) {
        const Json& pol = array(*it, "$.policies");
        ScenarioPolicy sp;
        for (std::size_t i = 0; i < pol.size(); ++i) {
            const std::string p = "$.policies[" + std::to_string(i) + "]";
            object(pol[i], p);
            only_keys(pol[i], p, {"edge", "policy"});
            const EdgeIndex e = edge_ref(graph, pol[i], "edge", p);
            EdgePolicy policy;
            try {
                policy = parse_edge_policy(string_at(pol[i], "policy", p));
            } catch (const ValidationError& err) {
                schema(p + ".policy", err.what());
            }
            if (!sp.per_edge.emplace(e, policy).second) {
                schema(p, "duplicate policy for edge '" + es[e].id + "'");
            }
        }
        model.policy = std::move(sp);
        try {
            (void)model.effective_adaptation();
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("$.policies: ") + e.what());
        }
    }

    if (auto it = doc.find("parameters"); it != doc.end()) {
        const std::string p = "$.parameters";
        object(*it, p);
        only_keys(*it, p, {"alpha", "beta", "lambda", "mu"});
        auto read = [&](const char* key, std::optional<double>& dst) {
            if (it->contains(key)) {
                dst = number((*it)[key], p + "." + key);
            }
        };
        read("alpha", model.parameters.alpha);
        read("beta", model.parameters.beta);
        read("lambda", model.parameters.lambda);
        read("mu", model.parameters.mu);
    }
    return model;
}

} // namespace

// ---------------------------------------------------------------------------
// Model

StubbornSpec Model::stubborn_or_none() const
{
    return stubborn ? *stubborn : StubbornSpec::none(sheaf);
}

AdaptationSpec Model::effective_adaptation() const
{
    AdaptationSpec base = adaptation ? *adaptation : AdaptationSpec::none(sheaf.graph());
    if (!policy) {
        return base;
    }
    return compile_policy(sheaf.graph(), stubborn_or_none(), *policy, base);
}

const Cochain0& Model::require_opinion(std::string_view what) const
{
    if (!opinion) {
        throw ValidationError(std::string(what) + " needs an 'opinion' section in the model");
    }
    return *opinion;
}

Model parse_model(std::string_view text)
{
    Json doc;
    try {
        doc = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw SchemaError(std::string("$: malformed document (") + e.what() + ")");
    }
    try {
        return parse_document(doc);
    } catch (const Json::exception& e) {
        throw SchemaError(std::string("$: ") + e.what());
    }
}

Model load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open model file '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_model(buf.str());
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

std::string serialize_model(const Model& model)
{
    const Sheaf& sheaf = model.sheaf;
    const Graph& g = sheaf.graph();
    Json doc = Json::object();
    doc["format"] = std::string(kModelFormat);
    doc["version"] = kModelVersion;

    Json vertices = Json::array();
    for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
        Json j = Json::object();
        j["id"] = g.vertex_id(v);
        j["dim"] = sheaf.vertex_dim(v);
        vertices.push_back(std::move(j));
    }
    doc["vertices"] = std::move(vertices);

    Json edges = Json::array();
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
        Json j = Json::object();
        j["id"] = g.edge(e).id;
        j["tail"] = g.vertex_id(g.edge(e).tail);
        j["head"] = g.vertex_id(g.edge(e).head);
        j["dim"] = sheaf.edge_dim(e);
        edges.push_back(std::move(j));
    }
    doc["edges"] = std::move(edges);

    Json restrictions = Json::array();
    for (const auto& inc : g.incidences()) {
        Json j = Json::object();
        j["vertex"] = g.vertex_id(inc.vertex);
        j["edge"] = g.edge(inc.edge).id;
        const Json m = matrix_json(sheaf.restriction(inc));
        j["rows"] = m["rows"];
        j["cols"] = m["cols"];
        j["data"] = m["data"];
        restrictions.push_back(std::move(j));
    }
    doc["restrictions"] = std::move(restrictions);

    if (model.opinion) {
        Json op = Json::array();
        for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
            Json j = Json::object();
            j["vertex"] = g.vertex_id(v);
            j["values"] = vector_json(sheaf.vertex_block(model.opinion->values, v));
            op.push_back(std::move(j));
        }
        doc["opinion"] = std::move(op);
    }
    if (model.stubborn) {
        Json st = Json::array();
        for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
            if (!model.stubborn->is_stubborn(v)) {
                continue;
            }
            Json j = Json::object();
            j["vertex"] = g.vertex_id(v);
            j["basis"] = matrix_json(model.stubborn->basis[v]);
            j["values"] = vector_json(model.stubborn->values[v]);
            st.push_back(std::move(j));
        }
        doc["stubborn"] = std::move(st);
    }
    if (model.adaptation) {
        Json ad = Json::object();
        if (model.adaptation_frozen) {
            ad["frozen"] = incidence_json(g, model.adaptation->frozen());
        } else {
            ad["adapting"] = incidence_json(g, model.adaptation->adapting());
        }
        doc["adaptation"] = std::move(ad);
    }
    if (model.policy) {
        Json pol = Json::array();
        for (const auto& [e, p] : model.policy->per_edge) {
            Json j = Json::object();
            j["edge"] = g.edge(e).id;
            j["policy"] = to_string(p);
            pol.push_back(std::move(j));
        }
        doc["policies"] = std::move(pol);
    }
    const auto& prm = model.parameters;
    if (prm.alpha || prm.beta || prm.lambda || prm.mu) {
        Json j = Json::object();
        if (prm.alpha) j["alpha"] = *prm.alpha;
        if (prm.beta) j["beta"] = *prm.beta;
        if (prm.lambda) j["lambda"] = *prm.lambda;
        if (prm.mu) j["mu"] = *prm.mu;
        doc["parameters"] = std::move(j);
    }
    return doc.dump(2) + "\n";
}

void save_model(const std::filesystem::path& path, const Model& model)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write model file '" + path.string() + "'");
    }
    out << serialize_model(model);
}

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// CSV

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, std::string_view kind)
{
    out << "# kind=" << kind << "\n# status=" << ode::to_string(traj.status) << "\n";
    const Eigen::Index n = traj.states.empty() ? 0 : traj.states.front().size();
    out << "t,energy";
    for (Eigen::Index k = 0; k < n; ++k) {
        out << ",s" << k;
    }
    out << "\n";
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        out << format_double(traj.times[i]) << ',' << format_double(traj.energy[i]);
        for (Eigen::Index k = 0; k < n; ++k) {
            out << ',' << format_double(traj.states[i][k]);
        }
        out << '\n';
    }
}

void write_joint_csv(std::ostream& out, const JointTrajectory& traj, const std::vector<VertexIndex>& audited)
{
    const auto& sys = traj.system;
    const Sheaf& sheaf = sys.initial_sheaf();
    const auto& g = sheaf.graph();
    out << "# kind=joint\n# alpha=" << format_double(traj.alpha) << "\n# beta=" << format_double(traj.beta) << "\n";
    if (traj.regularization) {
        out << "# lambda=" << format_double(traj.regularization->lambda) << "\n# mu="
            << format_double(traj.regularization->mu) << "\n";
    }
    out << "# status=" << ode::to_string(traj.status) << "\n";

    out << "t,psi,frobenius";
    for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
        out << ",norm_" << g.vertex_id(v);
    }
    for (VertexIndex v : audited) {
        for (Eigen::Index i = 0; i < sheaf.vertex_dim(v); ++i) {
            for (Eigen::Index j = 0; j < sheaf.vertex_dim(v); ++j) {
                out << ",Q_" << g.vertex_id(v) << '_' << i << '_' << j;
            }
        }
    }
    for (Eigen::Index k = 0; k < sys.free_dim(); ++k) {
        out << ",y" << k;
    }
    for (Eigen::Index k = 0; k < sys.map_dim(); ++k) {
        out << ",m" << k;
    }
    out << '\n';

    for (std::size_t s = 0; s < traj.states.size(); ++s) {
        const Vector& z = traj.states[s];
        const Vector x = sys.opinion(z);
        out << format_double(traj.times[s]) << ',' << format_double(traj.psi[s]) << ','
            << format_double(traj.frobenius[s]);
        for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
            out << ',' << format_double(sheaf.vertex_block(x, v).norm());
        }
        for (VertexIndex v : audited) {
            const Matrix q = sys.conservation_matrix(z, v, traj.alpha, traj.beta);
            for (Eigen::Index i = 0; i < q.rows(); ++i) {
                for (Eigen::Index j = 0; j < q.cols(); ++j) {
                    out << ',' << format_double(q(i, j));
                }
            }
        }
        for (Eigen::Index k = 0; k < z.size(); ++k) {
            out << ',' << format_double(z[k]);
        }
        out << '\n';
    }
}

namespace {

double parse_double(std::string_view s, std::size_t line)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw SchemaError("csv line " + std::to_string(line) + ": '" + std::string(s) + "' is not a number");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

} // namespace

JointCsv read_joint_csv(std::istream& in, Eigen::Index state_dim)
{
    JointCsv csv;
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    std::size_t t_col = 0;
    std::size_t first_state = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line.front() == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                const std::string key = line.substr(1, eq - 1);
                const std::string_view val(line.c_str() + eq + 1);
                if (key.find("alpha") != std::string::npos) {
                    csv.alpha = parse_double(val, lineno);
                } else if (key.find("beta") != std::string::npos) {
                    csv.beta = parse_double(val, lineno);
                }
            }
            continue;
        }
        const auto cells = split(line);
        if (header.empty()) {
            for (auto c : cells) {
                header.emplace_back(c);
            }
            auto find = [&](const std::string& name) {
                auto it = std::find(header.begin(), header.end(), name);
                if (it == header.end()) {
                    throw SchemaError("csv header: missing column '" + name + "'");
                }
                return static_cast<std::size_t>(it - header.begin());
            };
            t_col = find("t");
            if (state_dim == 0) {
                first_state = header.size();
            } else {
                // The packed state occupies the last state_dim columns.
                if (header.size() < static_cast<std::size_t>(state_dim) + 1) {
                    throw SchemaError("csv header: fewer columns than the packed state dimension");
                }
                first_state = header.size() - static_cast<std::size_t>(state_dim);
                const std::string& c = header[first_state];
                if (c != "y0" && c != "m0") {
                    throw SchemaError("csv header: packed state columns do not match the model (expected y0 or m0 at column "
                                      + std::to_string(first_state) + ")");
                }
            }
            continue;
        }
        if (cells.size() != header.size()) {
            throw SchemaError("csv line " + std::to_string(lineno) + ": " + std::to_string(cells.size())
                              + " cells, header has " + std::to_string(header.size()));
        }
        csv.times.push_back(parse_double(cells[t_col], lineno));
        Vector z(state_dim);
        for (Eigen::Index k = 0; k < state_dim; ++k) {
            z[k] = parse_double(cells[first_state + static_cast<std::size_t>(k)], lineno);
        }
        csv.states.push_back(std::move(z));
    }
    if (header.empty()) {
        throw SchemaError("csv: no header line");
    }
    return csv;
}

JointTrajectory trajectory_from_samples(const JointSystem& system, const JointCsv& csv, double alpha, double beta)
{
    if (csv.states.empty()) {
        throw SchemaError("csv: no samples");
    }
    JointTrajectory traj(system);
    traj.alpha = alpha;
    traj.beta = beta;
    traj.times = csv.times;
    traj.states = csv.states;
    for (const auto& z : traj.states) {
        if (z.size() != system.state_dim()) {
            throw ConformanceError("csv: sample length does not match the model state");
        }
        traj.psi.push_back(system.psi(z));
        traj.frobenius.push_back(system.maps_part(z).norm());
    }
    traj.message = "reloaded from samples";
    return traj;
}

} // namespace opsheaf
