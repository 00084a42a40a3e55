import logging

FORMAT: str = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def get_logger(name: str = "skygrid", level: int = logging.INFO) -> logging.Logger:
    """
    Build the console logger the command line uses. Calling this twice with the same name returns the same
    logger without stacking a second handler.

    :param name: logger name
    :param level: level applied to both the logger and its console handler
    :return: the configured logger
    """
    # create logger
    logger = logging.getLogger(name)
    logger.setLevel(level)

    if not any(getattr(handler, "_skygrid_console", False) for handler in logger.handlers):
        # create console handler and set level
        ch = logging.StreamHandler()
        ch._skygrid_console = True
        ch.setFormatter(logging.Formatter(FORMAT))
        logger.addHandler(ch)

    for handler in logger.handlers:
        handler.setLevel(level)

    return logger


def module_logger(module_name: str) -> logging.Logger:
    """
    Library modules log under the "skygrid" hierarchy so the console handler installed by get_logger picks
    their records up through propagation. They never attach handlers of their own.
    """
    return logging.getLogger(f"skygrid.{module_name}")
