import json
from pathlib import Path
from typing import List, Mapping, Optional, Union

import pandas as pd
from jinja2 import Environment, FileSystemLoader

from ._utils import check_exists, check_type


class ReportSection:
    """A heading and a table of an HTML report.

    Parameters
    ----------
    heading : str
    frame : pandas.DataFrame
        Rendered as an HTML table; cell contents are escaped.
    note : str, optional
        A line of text under the heading.
    float_format : str, default="{:.4f}"
    """
    def __init__(self, heading: str, frame: pd.DataFrame, note: Optional[str] = None, float_format: str = "{:.4f}"):
        check_type("heading", heading, str)
        check_type("frame", frame, pd.DataFrame)
        check_type("note", note, Optional[str])
        self.heading = heading
        self.note = note
        self.table = frame.to_html(index=False, float_format=float_format.format, border=0, na_rep="",
                                   escape=True)


def render_html_report(filename: Union[str, Path],
                       title: str,
                       sections: List[ReportSection],
                       config: Optional[Mapping] = None,
                       subcommand: Optional[str] = None) -> str:
    """Render a self-contained HTML report and save it to ``filename``.

    Parameters
    ----------
    filename : str or pathlib.Path
    title : str
    sections : list of ReportSection
    config : mapping, optional
        Resolved run configuration, shown verbatim at the end of the report.
    subcommand : str, optional

    Returns
    -------
    str
        The HTML that was written.
    """
    check_type("filename", filename, Union[str, Path])
    check_type("title", title, str)
    check_type("sections", sections, list)

    static_dir = Path(__file__).parent.joinpath("static")
    check_exists(static_dir, "'static' folder", file=False)
    template_file = static_dir.joinpath("report.html")
    check_exists(template_file, "HTML report template")

    env = Environment(loader=FileSystemLoader(str(static_dir)), trim_blocks=True, lstrip_blocks=True)
    template = env.get_template(template_file.name)

    from . import __version__
    html_out = template.render(
        title=title,
        version=__version__,
        subcommand=subcommand,
        sections=sections,
        config=json.dumps(config, indent=2, default=str) if config else "",
    )

    with open(Path(filename).absolute(), "w", encoding="utf-8", newline="\n") as f:
        f.write(html_out)
    return html_out
