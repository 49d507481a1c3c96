"""Legacy-ASCII VTK export of nodal fields on triangle meshes.

Floats are written with 17 significant digits so repeated runs produce
byte-identical files; the config fingerprint goes into the title line.
"""

from __future__ import annotations

import numpy as np


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_vtk(path, nodes: np.ndarray, tris: np.ndarray,
              point_data: dict[str, np.ndarray] | None = None,
              cell_data: dict[str, np.ndarray] | None = None,
              title: str = "metawave field export") -> None:
    """Write an unstructured triangle grid with scalar point/cell arrays.

    Complex point arrays are split into ``re_<name>`` and ``im_<name>``.
    """
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {len(nodes)} double")
    for x, y in nodes:
        lines.append(f"{_fmt(x)} {_fmt(y)} 0")
    lines.append(f"CELLS {len(tris)} {4 * len(tris)}")
    for a, b, c in tris:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {len(tris)}")
    lines.extend(["5"] * len(tris))

    def scalar_block(name, values, kind):
        if kind == "int":
            lines.append(f"SCALARS {name} int 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(str(int(v)) for v in values)
        else:
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(float(v)) for v in values)

    if point_data:
        lines.append(f"POINT_DATA {len(nodes)}")
        for name, values in point_data.items():
            values = np.asarray(values)
            if np.iscomplexobj(values):
                scalar_block(f"re_{name}", values.real, "double")
                scalar_block(f"im_{name}", values.imag, "double")
            else:
                scalar_block(name, values, "double")
    if cell_data:
        lines.append(f"CELL_DATA {len(tris)}")
        for name, values in cell_data.items():
            values = np.asarray(values)
            kind = "int" if values.dtype.kind in "bi" else "double"
            scalar_block(name, values.astype(int) if kind == "int" else values,
                         kind)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_field_vtk(path, solution, fingerprint: str = "") -> None:
    """Export a FieldSolution: re_u/im_u point arrays plus material tags."""
    title = f"metawave {solution.mode} config={fingerprint}"
    write_vtk(path, solution.mesh.nodes, solution.mesh.tris,
              point_data={"u": solution.u},
              cell_data={"material": solution.mesh.inclusion.astype(int)},
              title=title)
