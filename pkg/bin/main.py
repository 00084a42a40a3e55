import sys

from command_line import commands
from common.log import get_logger

# create logger
logger = get_logger("skygrid")

if __name__ == "__main__":
    exit_code = commands.main(sys.argv[1:])
    if exit_code:
        logger.error("skygrid exited with code %d", exit_code)
    sys.exit(exit_code)
