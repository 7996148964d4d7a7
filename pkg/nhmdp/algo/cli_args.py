from typing import List, Tuple

# settings that steer how configuration itself is loaded; never overridable from the command line
FORBIDDEN_CLI_ARGS = [
    'settings_files',
    'settings_file',
    'loaders',
    'core_loaders',
    'includes',
    'dynaconf_include',
    'preload',
    'root_path',
    'envvar_prefix',
    'merge_enabled',
    'environments',
]


class CliArgs:
    @staticmethod
    def validate_user_args(args: List[str]) -> Tuple[bool, str]:
        try:
            if not args:
                return True, ""

            forbidden_cli_args = []
            for word in FORBIDDEN_CLI_ARGS:
                word = word.lower()
                if '.' not in word:
                    word = '.' + word
                forbidden_cli_args.append(word)

            for arg in args:
                if arg.startswith('--'):
                    arg_word = arg.lower()
                    arg_word = arg_word.replace('__', '.')  # --solver__loaders -> --solver.loaders
                    key = arg_word.split('=', 1)[0]
                    for forbidden_arg_word in forbidden_cli_args:
                        if key.endswith(forbidden_arg_word) or f"{forbidden_arg_word}." in key:
                            return False, forbidden_arg_word
            return True, ""
        except Exception as e:
            return False, str(e)
