import pandas as pd
import seaborn as sns


def create_barplot(df: pd.DataFrame, cat: str = "covariate", quant: str = "mean", limit: int = 10, sort_by: str = "desc"):
    """
    This function draws posterior effect sizes as horizontal bars with their credibility intervals as error
    bars when lower and upper columns are present.

    :param df: dataframe to create the relevant bar plot, such as the output of transform.effect_sizes
    :param cat: category column
    :param quant: quantity column
    :param limit: limit of the number of categories to plot
    :param sort_by: sort by "desc" or "asc"
    :return: the matplotlib axes
    """
    if sort_by not in ["desc", "asc"]:
        raise ValueError("sort_by must be either 'desc' or 'asc'")
    elif sort_by == "desc":
        sort_flag = False
    else:
        sort_flag = True
    shown: pd.DataFrame = df.sort_values(by=quant, axis=0, ascending=sort_flag).head(limit)
    ax = sns.barplot(shown, y=cat, x=quant, hue=cat, orient='h')
    if {"lower", "upper"}.issubset(shown.columns):
        ax.errorbar(
            x=shown[quant],
            y=range(len(shown)),
            xerr=[shown[quant] - shown["lower"], shown["upper"] - shown[quant]],
            fmt="none",
            ecolor="black",
        )
    return ax


def plot_trajectory_band(df: pd.DataFrame, time: str = "time", overlay: str | None = None, ax=None):
    """
    This function draws the posterior trajectory from plot data: the mean as a step line with its 95% band,
    and optionally one covariate column on a twin axis.

    :param df: output of transform.plot_data
    :param time: time axis column, "time" or "year"
    :param overlay: covariate column to draw against the right-hand axis
    :param ax: matplotlib axes to draw into
    :return: the matplotlib axes
    """
    for column in (time, "mean", "lower", "upper"):
        if column not in df.columns:
            raise ValueError(f"plot data has no '{column}' column")
    ax = sns.lineplot(df, x=time, y="mean", sort=False, estimator=None, ax=ax, color="tab:blue")
    ax.fill_between(df[time], df["lower"], df["upper"], alpha=0.3, color="tab:blue")
    ax.set_ylabel("log effective population size")
    if overlay is not None:
        sns.lineplot(df, x=time, y=overlay, sort=False, estimator=None, ax=ax.twinx(), color="tab:orange")
    if time == "time":
        ax.invert_xaxis()
    return ax
