from logging.handlers import RotatingFileHandler
from logging import Filter, DEBUG, INFO, getLogger, Formatter, StreamHandler

from gamma2lab.helpers import mkdir_p


class RunContextFilter(Filter):
    """
    Stamps every record with the active command and seed
    """
    filename = "gamma2lab.log"
    max_size = 5000000  # 5 MB
    max_files = 5
    log_folder = 'logs'

    def __init__(self, command=None, seed=None):
        super().__init__()
        self.command = command or '-'
        self.seed = seed if seed is not None else '-'

    def filter(self, record):
        record.command = self.command
        record.seed = self.seed
        return True


class Gamma2Logger(object):
    def __init__(self, debug=None, data_folder=None, command=None, seed=None):
        self.data_folder = data_folder

        if debug:
            self.log_level = DEBUG
        else:
            self.log_level = INFO

        mkdir_p(f'{self.data_folder}/{RunContextFilter.log_folder}')

        self.logger = getLogger()
        self.logger.setLevel(DEBUG)
        self.context = RunContextFilter(command, seed)

        logger_formatter = Formatter('%(asctime)s : %(levelname)s : %(module)s : [%(command)s seed=%(seed)s] '
                                     ': %(message)s', '%Y-%m-%d %H:%M:%S')

        file_logger = RotatingFileHandler(f'{self.data_folder}/{RunContextFilter.log_folder}/'
                                          f'{RunContextFilter.filename}',
                                          mode='a', maxBytes=RunContextFilter.max_size, encoding=None, delay=0,
                                          backupCount=RunContextFilter.max_files)
        file_logger.setLevel(self.log_level)
        file_logger.setFormatter(logger_formatter)
        file_logger.addFilter(self.context)

        console_logger = StreamHandler()
        console_logger.setFormatter(logger_formatter)
        console_logger.setLevel(self.log_level)
        console_logger.addFilter(self.context)

        self.logger.addHandler(file_logger)
        self.logger.addHandler(console_logger)
        self.handlers = (file_logger, console_logger)

    def update_context(self, command=None, seed=None):
        if command is not None:
            self.context.command = command
        if seed is not None:
            self.context.seed = seed

    def close(self):
        for handler in self.handlers:
            self.logger.removeHandler(handler)
            handler.close()
