"""Prompt templates for the label and drawing-code generation stages.

The system texts keep the original line layout; only typesetting markup was
removed.  Do not reflow them.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["PromptTemplate", "DATA_TEMPLATE", "IMAGE_TEMPLATE"]


@dataclass(frozen=True)
class PromptTemplate:
    stage: str  # "data" | "image"
    system_text: str
    user_text: str  # contains one "{data}" placeholder inside the <data> slot

    def render_user(self, data: str) -> str:
        return self.user_text.replace("{data}", data)


DATA_TEMPLATE = PromptTemplate(
    stage="data",
    system_text=(
        "Copying the following table information can be expanded and adapted as\n"
        "appropriate, The imitation is as irrelevant as possible to the original text."
    ),
    user_text="The data is <data> {data} </data>",
)

IMAGE_TEMPLATE = PromptTemplate(
    stage="image",
    system_text=(
        "Consider you are a professional Python grapher.\n"
        "Please draw and save a chart based on the following data using Python, and images must be\n"
        "clear and intuitive.\n"
        "Choose a plot type that best suits the value, for example, line, column, scatter, and pie charts.\n"
        "Drawing techniques such as background grids can be used.\n"
        "Draw as much variety as possible.\n"
        "Clear the current image state at the end of the code.\n"
        "If the text length of the label is too long, use the method of adding the parameter rotation\n"
        "or display label on separate lines seting wrap=true.\n"
        "The figsize parameter is set to a larger setting to prevent content from being displayed.\n"
        "Automatically resize the image by tight_layout().\n"
        "You must use xticks to prevent interpolation.\n"
        "Do not set special fonts such as sans-serif and Arial etc. to avoid the problem of missing fonts.\n"
        "If the string in the picture is too long, find a way for all characters to show and not be\n"
        "overwritten and stacked on top of each other.\n"
        "Do not have extra leading words at the beginning and end of the generated code, such as\n"
        "python code, python, ```, etc.\n"
        "Check the generated code without errors, do not include undefined functions."
    ),
    user_text="The data is <data> {data} </data>",
)
