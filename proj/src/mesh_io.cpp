#include "mmc/space.hpp"

#include <fstream>
#include <sstream>

namespace mmc {

namespace {

std::string next_content_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
  }
  throw SpaceError("unexpected end of mesh file");
}

void push_polygon(TriMesh& m, const std::vector<int>& poly) {
  if (poly.size() < 3) throw SpaceError("face with fewer than three vertices");
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) m.faces.push_back({poly[0], poly[k], poly[k + 1]});
}

}  // namespace

TriMesh read_off(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpaceError("cannot read " + path);
  std::string header = next_content_line(in);
  std::istringstream hs(header);
  std::string tag;
  hs >> tag;
  if (tag.rfind("OFF", 0) != 0) throw SpaceError("missing OFF header in " + path);
  int nv = 0, nf = 0, ne = 0;
  if (!(hs >> nv)) {
    std::istringstream cs(next_content_line(in));
    cs >> nv >> nf >> ne;
  } else {
    hs >> nf >> ne;
  }
  if (nv <= 0 || nf <= 0) throw SpaceError("bad OFF counts in " + path);
  TriMesh m;
  for (int i = 0; i < nv; ++i) {
    std::istringstream ls(next_content_line(in));
    Eigen::Vector3d p;
    if (!(ls >> p[0] >> p[1] >> p[2])) throw SpaceError("bad OFF vertex line");
    m.vertices.push_back(p);
  }
  for (int i = 0; i < nf; ++i) {
    std::istringstream ls(next_content_line(in));
    int k = 0;
    ls >> k;
    std::vector<int> poly(k);
    for (int& v : poly)
      if (!(ls >> v)) throw SpaceError("bad OFF face line");
    push_polygon(m, poly);
  }
  return m;
}

TriMesh read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpaceError("cannot read " + path);
  TriMesh m;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ls >> p[0] >> p[1] >> p[2])) throw SpaceError("bad OBJ vertex line");
      m.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) {
        const int idx = std::stoi(tok.substr(0, tok.find('/')));
        poly.push_back(idx > 0 ? idx - 1 : static_cast<int>(m.vertices.size()) + idx);
      }
      push_polygon(m, poly);
    }
  }
  return m;
}

DiscreteSpace mesh_file(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  TriMesh m;
  if (ext == "off" || ext == "OFF")
    m = read_off(path);
  else if (ext == "obj" || ext == "OBJ")
    m = read_obj(path);
  else
    throw SpaceError("unsupported mesh extension: " + path);
  return from_trimesh(m);
}

}  // namespace mmc
