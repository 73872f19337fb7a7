#include "screwiga/serialize.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "screwiga/error.hpp"

namespace screwiga {

namespace {

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Tokens {
public:
  explicit Tokens(std::istream& in) : in_(in) {}

  std::string word(const char* what) {
    std::string s;
    if (!(in_ >> s))
      fail(ErrorKind::Geometry, std::string("geometry file truncated while reading ") + what);
    return s;
  }
  void expect(const std::string& keyword) {
    const std::string s = word(keyword.c_str());
    require(s == keyword, ErrorKind::Geometry, "geometry file: expected '" + keyword + "', found '" + s + "'");
  }
  int integer(const char* what) {
    const std::string s = word(what);
    try {
      std::size_t pos = 0;
      const int v = std::stoi(s, &pos);
      if (pos == s.size())
        return v;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::Geometry, std::string("geometry file: bad integer for ") + what + ": '" + s + "'");
  }
  double number(const char* what) {
    const std::string s = word(what);
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos == s.size())
        return v;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::Geometry, std::string("geometry file: bad number for ") + what + ": '" + s + "'");
  }

private:
  std::istream& in_;
};

} // namespace

void writeGeometry(const MultiPatchModel& model, std::ostream& out) {
  const std::string name = model.name.empty() ? "model" : model.name;
  require(name.find_first_of(" \t\n") == std::string::npos, ErrorKind::InvalidArgument,
          "model names must not contain whitespace");
  out << "screwiga-geometry 1\n";
  out << "name " << name << "\n";
  out << "patches " << model.patches.size() << "\n";
  for (std::size_t p = 0; p < model.patches.size(); ++p) {
    const auto& patch = model.patches[p];
    out << "patch " << p << " pardim " << patch.parDim() << " geodim " << patch.geoDim() << " rational "
        << (patch.rational() ? 1 : 0) << "\n";
    for (int d = 0; d < patch.parDim(); ++d) {
      const auto& kv = patch.knots(d);
      out << "knots " << kv.degree() << " " << kv.size();
      for (double k : kv.knots())
        out << " " << real(k);
      out << "\n";
    }
    out << "controls " << patch.controlCount() << "\n";
    for (int i = 0; i < patch.controlCount(); ++i) {
      const auto cp = patch.controlPoint(i);
      for (int c = 0; c < patch.geoDim(); ++c)
        out << (c ? " " : "") << real(cp[c]);
      if (patch.rational())
        out << " " << real(patch.weight(i));
      out << "\n";
    }
  }
  out << "interfaces " << model.interfaces.size() << "\n";
  for (const auto& i : model.interfaces)
    out << i.a.patch << " " << i.a.side << " " << i.b.patch << " " << i.b.side << " " << i.flip[0] << " " << i.flip[1]
        << "\n";
  out << "boundaries " << model.boundaries.size() << "\n";
  for (const auto& [bname, sides] : model.boundaries) {
    require(!bname.empty() && bname.find_first_of(" \t\n") == std::string::npos, ErrorKind::InvalidArgument,
            "boundary names must be single words");
    out << bname << " " << sides.size();
    for (const auto& s : sides)
      out << " " << s.patch << " " << s.side;
    out << "\n";
  }
  out << "degenerate " << model.degenerateSides.size();
  for (const auto& s : model.degenerateSides)
    out << " " << s.patch << " " << s.side;
  out << "\nend\n";
}

std::string geometryToString(const MultiPatchModel& model) {
  std::ostringstream os;
  writeGeometry(model, os);
  return os.str();
}

MultiPatchModel readGeometry(std::istream& in) {
  Tokens t(in);
  t.expect("screwiga-geometry");
  const int version = t.integer("version");
  require(version == 1, ErrorKind::Geometry, "unsupported geometry format version " + std::to_string(version));
  MultiPatchModel m;
  t.expect("name");
  m.name = t.word("name");
  t.expect("patches");
  const int np = t.integer("patch count");
  require(np >= 0, ErrorKind::Geometry, "negative patch count");
  for (int p = 0; p < np; ++p) {
    t.expect("patch");
    require(t.integer("patch index") == p, ErrorKind::Geometry, "patches out of order");
    t.expect("pardim");
    const int pd = t.integer("pardim");
    t.expect("geodim");
    const int gd = t.integer("geodim");
    t.expect("rational");
    const bool rat = t.integer("rational") != 0;
    require(pd >= 1 && pd <= 3 && gd >= 1 && gd <= 3, ErrorKind::Geometry, "bad patch dimensions");
    std::vector<KnotVector> kvs;
    for (int d = 0; d < pd; ++d) {
      t.expect("knots");
      const int deg = t.integer("degree");
      const int n = t.integer("knot count");
      require(n > 0 && n < 1000000, ErrorKind::Geometry, "bad knot count");
      std::vector<double> k(n);
      for (auto& v : k)
        v = t.number("knot");
      kvs.emplace_back(deg, std::move(k));
    }
    t.expect("controls");
    const int nc = t.integer("control count");
    std::vector<double> coefs;
    std::vector<double> weights;
    for (int i = 0; i < nc; ++i) {
      for (int c = 0; c < gd; ++c)
        coefs.push_back(t.number("coordinate"));
      if (rat)
        weights.push_back(t.number("weight"));
    }
    try {
      m.patches.emplace_back(std::move(kvs), gd, std::move(coefs), std::move(weights));
    } catch (const Error& e) {
      fail(ErrorKind::Geometry, std::string("geometry file: ") + e.what());
    }
  }
  t.expect("interfaces");
  const int ni = t.integer("interface count");
  for (int i = 0; i < ni; ++i) {
    Interface itf;
    itf.a.patch = t.integer("patch");
    itf.a.side = t.integer("side");
    itf.b.patch = t.integer("patch");
    itf.b.side = t.integer("side");
    itf.flip[0] = t.integer("flip") != 0;
    itf.flip[1] = t.integer("flip") != 0;
    m.interfaces.push_back(itf);
  }
  t.expect("boundaries");
  const int nb = t.integer("boundary count");
  for (int i = 0; i < nb; ++i) {
    const std::string bname = t.word("boundary name");
    const int n = t.integer("side count");
    auto& sides = m.boundaries[bname];
    for (int k = 0; k < n; ++k) {
      SideRef s;
      s.patch = t.integer("patch");
      s.side = t.integer("side");
      sides.push_back(s);
    }
  }
  t.expect("degenerate");
  const int nd = t.integer("degenerate count");
  for (int i = 0; i < nd; ++i) {
    SideRef s;
    s.patch = t.integer("patch");
    s.side = t.integer("side");
    m.degenerateSides.push_back(s);
  }
  t.expect("end");
  return m;
}

void saveGeometry(const MultiPatchModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path + " for writing");
  writeGeometry(model, out);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path);
}

MultiPatchModel loadGeometry(const std::string& path) {
  require(std::filesystem::exists(path), ErrorKind::Geometry, "missing geometry artifact " + path);
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  return readGeometry(in);
}

PointCloud2D readPointCloud(std::istream& in) {
  PointCloud2D cloud;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first))
      continue;
    if (first.size() > 1 && first.back() == ':')
      first.pop_back();
    if (first == "closed") {
      int v = 1;
      require(static_cast<bool>(ls >> v), ErrorKind::Geometry, "point cloud line " + std::to_string(lineNo) + ": bad closed flag");
      cloud.closed = v != 0;
      continue;
    }
    if (first == "corners") {
      int c;
      while (ls >> c)
        cloud.corners.push_back(c);
      require(ls.eof(), ErrorKind::Geometry, "point cloud line " + std::to_string(lineNo) + ": bad corner index");
      continue;
    }
    double x = 0.0, y = 0.0;
    try {
      x = std::stod(first);
    } catch (const std::exception&) {
      fail(ErrorKind::Geometry, "point cloud line " + std::to_string(lineNo) + ": expected a coordinate pair");
    }
    require(static_cast<bool>(ls >> y), ErrorKind::Geometry,
            "point cloud line " + std::to_string(lineNo) + ": expected a coordinate pair");
    std::string rest;
    require(!(ls >> rest), ErrorKind::Geometry, "point cloud line " + std::to_string(lineNo) + ": trailing data");
    cloud.points.emplace_back(x, y);
  }
  require(!cloud.points.empty(), ErrorKind::Geometry, "point cloud is empty");
  return cloud;
}

PointCloud2D loadPointCloud(const std::string& path) {
  require(std::filesystem::exists(path), ErrorKind::Io, "missing point cloud " + path);
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  return readPointCloud(in);
}

void savePointCloud(const PointCloud2D& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path + " for writing");
  out << "closed " << (cloud.closed ? 1 : 0) << "\n";
  if (!cloud.corners.empty()) {
    out << "corners";
    for (int c : cloud.corners)
      out << " " << c;
    out << "\n";
  }
  for (const auto& p : cloud.points)
    out << real(p.x()) << " " << real(p.y()) << "\n";
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path);
}

void saveField(const DiscreteField& field, const std::string& path) {
  require(field.space != nullptr, ErrorKind::InvalidArgument, "field has no space");
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path + " for writing");
  const auto& model = field.space->model();
  const int nc = field.space->components();
  out << "screwiga-field 1\ncomponents " << nc << "\npatches " << model.patches.size() << "\n";
  for (std::size_t p = 0; p < model.patches.size(); ++p) {
    const Eigen::MatrixXd c = field.patchCoefficients(static_cast<int>(p));
    out << "patch " << p << " " << c.rows() << "\n";
    for (int i = 0; i < c.rows(); ++i) {
      for (int k = 0; k < nc; ++k)
        out << (k ? " " : "") << real(c(i, k));
      out << "\n";
    }
  }
  out << "end\n";
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path);
}

DiscreteField loadField(std::shared_ptr<const MultiPatchModel> model, const std::string& path) {
  require(std::filesystem::exists(path), ErrorKind::Io, "missing field artifact " + path);
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  Tokens t(in);
  try {
    t.expect("screwiga-field");
    require(t.integer("version") == 1, ErrorKind::Geometry, "unsupported field format version");
    t.expect("components");
    const int nc = t.integer("components");
    t.expect("patches");
    const int np = t.integer("patches");
    require(np == static_cast<int>(model->patches.size()), ErrorKind::Geometry,
            "field file " + path + " does not match the model patch count");
    auto space = std::make_shared<DiscreteSpace>(model, nc);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(space->totalCount());
    for (int p = 0; p < np; ++p) {
      t.expect("patch");
      require(t.integer("patch") == p, ErrorKind::Geometry, "field patches out of order");
      const int n = t.integer("count");
      require(n == model->patches[p].controlCount(), ErrorKind::Geometry,
              "field file " + path + " does not match the model control count");
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < nc; ++c)
          full[space->globalDof(space->scalarIndex(p, i), c)] = t.number("coefficient");
    }
    t.expect("end");
    return DiscreteField(space, full);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Geometry)
      fail(ErrorKind::Io, "corrupt field file " + path + ": " + e.what());
    throw;
  }
}

std::string fileDigest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

} // namespace screwiga
